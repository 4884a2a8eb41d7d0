//! The two prompt programs end to end: prompt assembly, the model call, strict
//! parsing with one repair retry, and reference-image attachment.

pub mod feature;
mod lenient;
pub mod product;
pub mod prompts;

use futures::future::join_all;
use serde::Serialize;

use crate::corpus::Persona;
use crate::gateway::{ChatRequest, Gateway, GatewayError, ImageRef};
pub use feature::{parse_feature_response, Dimension, FeatureEntry, FeatureMatrix, FeatureParseError, Provenance};
pub use product::{parse_product_response, ProductBatch, ProductParseError, ProductSuggestion, PRODUCT_COUNT};

/// Search depth behind the swap rotation.
pub const SEARCH_DEPTH: usize = 5;
pub const FIRST_DISPLAY_COUNT: usize = 5;
pub const NEXT_DISPLAY_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(untagged)]
pub enum ParseFailure {
    #[error(transparent)]
    Product(#[from] ProductParseError),
    #[error(transparent)]
    Feature(#[from] FeatureParseError),
}

impl ParseFailure {
    pub fn code(&self) -> &'static str {
        match self {
            ParseFailure::Product(e) => e.code(),
            ParseFailure::Feature(e) => e.code(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("response rejected twice (first: {first_error}; after repair: {second_error})")]
    Unparseable {
        first_raw: String,
        first_error: ParseFailure,
        second_raw: String,
        second_error: ParseFailure,
    },
    #[error("{0}")]
    Precondition(String),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Gateway(GatewayError::Precondition(_)) | PipelineError::Precondition(_) => {
                "precondition_error"
            }
            PipelineError::Gateway(_) => "provider_error",
            PipelineError::Unparseable { second_error, .. } => second_error.code(),
        }
    }
}

/// Call, parse, and on a parse failure re-send once with the repair sentence.
async fn call_with_repair<T>(
    gateway: &Gateway,
    request: &ChatRequest,
    repair: &str,
    parse: impl Fn(&str) -> Result<T, ParseFailure>,
) -> Result<(T, u32), PipelineError> {
    let first_raw = gateway.complete(request).await?;
    let first_error = match parse(&first_raw) {
        Ok(value) => return Ok((value, 0)),
        Err(e) => e,
    };
    tracing::debug!(code = first_error.code(), "response rejected, sending repair");
    let second_raw = gateway.complete(&prompts::with_repair(request, repair)).await?;
    match parse(&second_raw) {
        Ok(value) => Ok((value, 1)),
        Err(second_error) => Err(PipelineError::Unparseable {
            first_raw,
            first_error,
            second_raw,
            second_error,
        }),
    }
}

/// Nine product suggestions for a persona.
pub async fn infer_products(gateway: &Gateway, persona: &Persona) -> Result<ProductBatch, PipelineError> {
    let request = prompts::build_product_prompt(persona);
    let (mut batch, repairs) = call_with_repair(gateway, &request, prompts::PRODUCT_REPAIR, |raw| {
        parse_product_response(raw, &persona.id).map_err(ParseFailure::from)
    })
    .await?;
    batch.repair_count = repairs;
    Ok(batch)
}

/// The 3×3×3 feature matrix for one product image.
pub async fn extract_features(gateway: &Gateway, provenance: Provenance) -> Result<FeatureMatrix, PipelineError> {
    let request = prompts::build_feature_prompt(&provenance.image);
    let (mut matrix, repairs) = call_with_repair(gateway, &request, prompts::FEATURE_REPAIR, |raw| {
        parse_feature_response(raw, provenance.clone()).map_err(ParseFailure::from)
    })
    .await?;
    matrix.repair_count = repairs;
    Ok(matrix)
}

/// Search for the suggestion's name and pick the result at its rotation index.
/// Failures and empty results leave it imageless and come back as a warning.
pub async fn pick_image(gateway: &Gateway, suggestion: &ProductSuggestion) -> Result<ImageRef, String> {
    match gateway.search_images(&suggestion.name, SEARCH_DEPTH).await {
        Ok(results) if results.is_empty() => Err(format!("no reference image found for `{}`", suggestion.name)),
        Ok(results) => {
            let rank = suggestion.image_rotation_index as usize % results.len();
            Ok(results[rank].clone())
        }
        Err(e) => Err(format!("image search failed for `{}`: {e}", suggestion.name)),
    }
}

/// Attach images to the suggestions at `indices`, concurrently. Returns the
/// warnings raised, which are also appended to the batch.
pub async fn attach_images(gateway: &Gateway, batch: &mut ProductBatch, indices: &[usize]) -> Vec<String> {
    let picks = join_all(indices.iter().map(|&i| pick_image(gateway, &batch.suggestions[i]))).await;
    let mut warnings = Vec::new();
    for (&i, pick) in indices.iter().zip(picks) {
        match pick {
            Ok(image) => batch.suggestions[i].image = Some(image),
            Err(warning) => {
                batch.suggestions[i].image = None;
                warnings.push(warning);
            }
        }
    }
    batch.warnings.extend(warnings.iter().cloned());
    warnings
}

/// Attach images to the first `display_count` suggestions.
pub async fn attach_reference_images(
    gateway: &Gateway,
    mut batch: ProductBatch,
    display_count: usize,
) -> Result<ProductBatch, PipelineError> {
    if !(1..=batch.suggestions.len()).contains(&display_count) {
        return Err(PipelineError::Precondition(format!(
            "display count must be in 1..={}, got {display_count}",
            batch.suggestions.len()
        )));
    }
    let indices: Vec<usize> = (0..display_count).collect();
    attach_images(gateway, &mut batch, &indices).await;
    Ok(batch)
}

/// Advance the rotation index and re-pick the image.
pub async fn swap(gateway: &Gateway, suggestion: &mut ProductSuggestion) -> Option<String> {
    suggestion.image_rotation_index += 1;
    match pick_image(gateway, suggestion).await {
        Ok(image) => {
            suggestion.image = Some(image);
            None
        }
        Err(warning) => {
            suggestion.image = None;
            Some(warning)
        }
    }
}
