//! Baseline mode: free-form chat with personas embedded in the context.

use serde_json::Value;

use crate::corpus::Persona;
use crate::gateway::{ChatRequest, ChatTurn};
use crate::session::ChatMessage;

pub const ROLE_PLAY_FRAMING: &str = "You are role-playing the persona(s) described below. Answer in character, drawing on their background, personality and habits. When several personas are present, say which one is speaking.";
pub const CHAT_CONTEXT_MESSAGES: usize = 20;
const CHAT_MAX_OUTPUT_CHARS: u32 = 4_000;
const CHAT_TEMPERATURE: f32 = 0.7;

/// Every raw attribute of the persona, one `key: value` line each.
pub fn persona_block(persona: &Persona) -> String {
    let mut lines = vec![format!("<persona id=\"{}\">", persona.id)];
    for (key, value) in &persona.raw {
        let text = match value {
            Value::Null => continue,
            Value::String(s) => s.split_whitespace().collect::<Vec<_>>().join(" "),
            other => other.to_string(),
        };
        lines.push(format!("{key}: {text}"));
    }
    lines.push("</persona>".to_string());
    lines.join("\n")
}

/// Framing line plus all persona blocks as system text, the most recent
/// messages as history, the new question as user text.
pub fn baseline_request(personas: &[&Persona], messages: &[ChatMessage], question: &str) -> ChatRequest {
    let blocks: Vec<String> = personas.iter().map(|p| persona_block(p)).collect();
    let skip = messages.len().saturating_sub(CHAT_CONTEXT_MESSAGES);
    ChatRequest {
        system_text: format!("{ROLE_PLAY_FRAMING}\n\n{}", blocks.join("\n\n")),
        user_text: question.to_string(),
        max_output_chars: CHAT_MAX_OUTPUT_CHARS,
        temperature: CHAT_TEMPERATURE,
        history: messages[skip..]
            .iter()
            .map(|m| ChatTurn {
                role: m.role,
                text: m.text.clone(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PersonaCorpus;
    use crate::gateway::Role;

    #[test]
    fn window_keeps_latest_messages() {
        let corpus = PersonaCorpus::load(
            r#"{"id":"a","age":30,"big_five_scores":{"openness":1,"conscientiousness":1,"extraversion":1,"agreeableness":1,"neuroticism":1},"lifestyle":"Night owl"}
{"id":"b","age":50,"big_five_scores":{"openness":2,"conscientiousness":2,"extraversion":2,"agreeableness":2,"neuroticism":2}}"#
                .as_bytes(),
        )
        .unwrap();
        let personas: Vec<&Persona> = corpus.personas().iter().collect();
        let messages: Vec<ChatMessage> = (0..25)
            .map(|i| ChatMessage {
                role: if i % 2 == 0 { Role::User } else { Role::Assistant },
                text: format!("m{i}"),
                timestamp: i,
            })
            .collect();
        let req = baseline_request(&personas, &messages, "What chair do you want?");
        assert_eq!(req.history.len(), CHAT_CONTEXT_MESSAGES);
        assert_eq!(req.history[0].text, "m5");
        assert!(req.system_text.starts_with(ROLE_PLAY_FRAMING));
        assert!(req.system_text.contains("<persona id=\"a\">") && req.system_text.contains("<persona id=\"b\">"));
        assert!(req.system_text.contains("lifestyle: Night owl"));
        assert_eq!(req.user_text, "What chair do you want?");
    }
}
