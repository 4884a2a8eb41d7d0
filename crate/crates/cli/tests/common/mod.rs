#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub const CLOCK_MS: &str = "1700000000000";

pub fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn demo() -> PathBuf {
    repo().join("demo")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Run the binary from `cwd` against the demo corpus and fixtures, with a
/// fixed clock and no ambient configuration.
pub fn personagram(cwd: &Path, args: &[&str]) -> Output {
    let demo = demo();
    Command::new(env!("CARGO_BIN_EXE_personagram"))
        .current_dir(cwd)
        .env_remove("PERSONAGRAM_CONFIG")
        .env_remove("PERSONAGRAM_PROVIDERS")
        .env_remove("PERSONAGRAM_SESSIONS")
        .env("PERSONAGRAM_CLOCK_MS", CLOCK_MS)
        .arg("--corpus")
        .arg(demo.join("personas.jsonl"))
        .arg("--fixtures")
        .arg(demo.join("fixtures"))
        .args(args)
        .output()
        .unwrap()
}

pub fn stdout_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The documented walk-through: infer for a persona, extract features from
/// the first suggestion's image, pick features, compose, generate, then the
/// analytics commands. Returns (name, output) pairs in order.
pub fn walk_through(work: &Path) -> Vec<(String, String)> {
    let mut outputs = Vec::new();
    let mut keep = |name: &str, text: String| {
        outputs.push((name.to_string(), text.clone()));
        text
    };

    let filter = stdout_ok(&personagram(
        work,
        &[
            "personas",
            "filter",
            "--facet",
            "BasicInfo/Age=26–35",
            "--facet",
            "BasicInfo/Sex=Female",
        ],
    ));
    keep("personas_filter.json", filter);
    keep(
        "personas_show.txt",
        stdout_ok(&personagram(work, &["--format", "text", "personas", "show", "p0001"])),
    );

    let infer = keep(
        "infer.json",
        stdout_ok(&personagram(work, &["infer", "--persona-id", "p0001"])),
    );
    keep(
        "infer.txt",
        stdout_ok(&personagram(
            work,
            &["--format", "text", "infer", "--persona-id", "p0001"],
        )),
    );
    let batch: Value = serde_json::from_str(&infer).unwrap();
    let first = &batch["suggestions"][0];
    let name = first["name"].as_str().unwrap();
    let image = first["image"]["url"].as_str().unwrap();
    let rank = first["image"]["rank"].to_string();

    let features_args = [
        "features",
        "--image",
        image,
        "--persona-id",
        "p0001",
        "--product",
        name,
        "--rank",
        rank.as_str(),
    ];
    let features = keep("features.json", stdout_ok(&personagram(work, &features_args)));
    let mut csv_args = vec!["--format", "csv"];
    csv_args.extend(features_args);
    keep("features.csv", stdout_ok(&personagram(work, &csv_args)));

    let matrix: Value = serde_json::from_str(&features).unwrap();
    let mut selections = Vec::new();
    for (i, dim) in ["aesthetics", "behavioral", "contextual"].iter().enumerate() {
        for entry in matrix[dim].as_array().unwrap().iter().skip(i).step_by(4) {
            selections.push(json!({
                "dimension": dim,
                "key": entry["key"],
                "phrase": entry["phrase"],
                "provenance": matrix["provenance"],
                "selected_at": 0,
            }));
        }
    }
    let selections_path = work.join("selections.json");
    std::fs::write(&selections_path, serde_json::to_string_pretty(&selections).unwrap()).unwrap();
    let sel = selections_path.to_str().unwrap();

    let draft = keep(
        "compose.json",
        stdout_ok(&personagram(
            work,
            &["compose", "--selections-file", sel, "--subject", "a balcony planter"],
        )),
    );
    keep(
        "compose.txt",
        stdout_ok(&personagram(
            work,
            &[
                "--format",
                "text",
                "compose",
                "--selections-file",
                sel,
                "--subject",
                "a balcony planter",
            ],
        )),
    );
    let draft_path = work.join("draft.json");
    std::fs::write(&draft_path, &draft).unwrap();
    keep(
        "generate.json",
        stdout_ok(&personagram(
            work,
            &["generate", "--draft-file", draft_path.to_str().unwrap(), "-n", "4"],
        )),
    );

    let logs = demo().join("logs");
    let p6 = logs.join("P6-personagram.json");
    let p6b = logs.join("P6-baseline.json");
    keep(
        "metrics_p6.csv",
        stdout_ok(&personagram(
            work,
            &[
                "--format",
                "csv",
                "metrics",
                "--session-file",
                p6.to_str().unwrap(),
                p6b.to_str().unwrap(),
            ],
        )),
    );
    let replay = keep(
        "replay_p6.json",
        stdout_ok(&personagram(
            work,
            &["session", "replay", "--events-file", p6.to_str().unwrap()],
        )),
    );
    let replayed: Value = serde_json::from_str(&replay).unwrap();
    let doc = work.join("p6-session.json");
    std::fs::write(&doc, serde_json::to_string_pretty(&replayed["session"]).unwrap()).unwrap();
    keep(
        "metrics_p6_from_document.txt",
        stdout_ok(&personagram(
            work,
            &["--format", "text", "metrics", "--session-file", doc.to_str().unwrap()],
        )),
    );
    outputs
}
