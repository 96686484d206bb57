//! HTTP-backed part-count provider and segmenter. Both are offline by
//! default and configured entirely through environment variables; nothing
//! in the pipeline or the test suites touches the network.
//!
//! Part counting posts two rendered views to a chat-completion endpoint
//! (`ARTIKIN_VLM_ENDPOINT`, optional `ARTIKIN_VLM_TOKEN`,
//! `ARTIKIN_VLM_MODEL`) with the fixed prompt and parses
//! "Number of moved components: \[N]" from the reply. Segmentation posts
//! one rendered view plus point prompts to `ARTIKIN_SAM_ENDPOINT`
//! (optional `ARTIKIN_SAM_TOKEN`) and expects
//! `{"mask_pgm_base64": "<P5 mask>"}` back. Images travel as base64 binary
//! PPM. Endpoints must be plain http; TLS is not compiled in.

use base64::Engine;
use serde_json::json;

use crate::image::{parse_mask_pgm, ppm_bytes};
use crate::refine::{PartMask, PromptSet, RefineError, Segmenter};
use crate::segment::{PartCountProvider, StatePairImages};

const COUNT_PROMPT: &str = "Compare the two images. How many components moved?\n\
                            Answer: 'Number of moved components: [N]'.";

pub const VLM_ENDPOINT_VAR: &str = "ARTIKIN_VLM_ENDPOINT";
pub const VLM_TOKEN_VAR: &str = "ARTIKIN_VLM_TOKEN";
pub const VLM_MODEL_VAR: &str = "ARTIKIN_VLM_MODEL";
pub const SAM_ENDPOINT_VAR: &str = "ARTIKIN_SAM_ENDPOINT";
pub const SAM_TOKEN_VAR: &str = "ARTIKIN_SAM_TOKEN";

fn data_url(image: &crate::image::RgbImage) -> String {
    let b64 = base64::engine::general_purpose::STANDARD.encode(ppm_bytes(image));
    format!("data:image/x-portable-pixmap;base64,{b64}")
}

/// Part-count provider backed by a chat-completion endpoint.
pub struct HttpProvider {
    endpoint: String,
    token: Option<String>,
    model: String,
}

impl HttpProvider {
    /// Configure from environment variables; None when no endpoint is set.
    pub fn from_env() -> Option<HttpProvider> {
        let endpoint = std::env::var(VLM_ENDPOINT_VAR).ok()?;
        Some(HttpProvider {
            endpoint,
            token: std::env::var(VLM_TOKEN_VAR).ok(),
            model: std::env::var(VLM_MODEL_VAR).unwrap_or_else(|_| "default".into()),
        })
    }

    pub fn new(endpoint: String, token: Option<String>, model: String) -> HttpProvider {
        HttpProvider {
            endpoint,
            token,
            model,
        }
    }
}

/// Extract N from "Number of moved components: \[N]" (brackets optional).
pub fn parse_count_reply(text: &str) -> Option<u32> {
    let key = "Number of moved components:";
    let pos = text.find(key)?;
    let tail = &text[pos + key.len()..];
    let digits: String = tail
        .chars()
        .skip_while(|c| c.is_whitespace() || *c == '[')
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

impl PartCountProvider for HttpProvider {
    fn count_moved(&self, pair: &StatePairImages) -> Result<u32, String> {
        let body = json!({
            "model": self.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": COUNT_PROMPT},
                    {"type": "image_url", "image_url": {"url": data_url(&pair.image_a)}},
                    {"type": "image_url", "image_url": {"url": data_url(&pair.image_b)}},
                ],
            }],
        });
        let mut request = ureq::post(&self.endpoint);
        if let Some(token) = &self.token {
            request = request.header("authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| format!("request failed: {e}"))?;
        let reply: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| format!("bad response body: {e}"))?;
        let content = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or("response has no message content")?;
        parse_count_reply(content)
            .ok_or_else(|| format!("could not parse count from reply: {content:?}"))
    }
}

/// Segmenter backed by an HTTP endpoint that accepts an image plus point
/// prompts and returns a base64 P5 mask.
pub struct HttpSegmenter {
    endpoint: String,
    token: Option<String>,
}

impl HttpSegmenter {
    pub fn from_env() -> Option<HttpSegmenter> {
        let endpoint = std::env::var(SAM_ENDPOINT_VAR).ok()?;
        Some(HttpSegmenter {
            endpoint,
            token: std::env::var(SAM_TOKEN_VAR).ok(),
        })
    }

    pub fn new(endpoint: String, token: Option<String>) -> HttpSegmenter {
        HttpSegmenter { endpoint, token }
    }
}

impl Segmenter for HttpSegmenter {
    fn segment(&self, image: &crate::image::RgbImage, prompts: &PromptSet) -> Result<PartMask, RefineError> {
        prompts.validate(image.width, image.height)?;
        let body = json!({
            "image_ppm_base64": base64::engine::general_purpose::STANDARD.encode(ppm_bytes(image)),
            "width": image.width,
            "height": image.height,
            "label": prompts.label,
            "view": prompts.view,
            "positives": prompts.positives,
            "negatives": prompts.negatives,
        });
        let mut request = ureq::post(&self.endpoint);
        if let Some(token) = &self.token {
            request = request.header("authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| RefineError::SegmenterFailed(format!("request failed: {e}")))?;
        let reply: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| RefineError::SegmenterFailed(format!("bad response body: {e}")))?;
        let b64 = reply["mask_pgm_base64"]
            .as_str()
            .ok_or_else(|| RefineError::SegmenterFailed("response missing mask_pgm_base64".into()))?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(b64)
            .map_err(|e| RefineError::SegmenterFailed(format!("bad base64 mask: {e}")))?;
        let mask = parse_mask_pgm(&bytes)
            .map_err(|e| RefineError::SegmenterFailed(format!("bad mask payload: {e}")))?;
        if mask.width != image.width || mask.height != image.height {
            return Err(RefineError::MaskDimensionMismatch(
                mask.width,
                mask.height,
                image.width,
                image.height,
            ));
        }
        Ok(PartMask {
            view: prompts.view,
            label: prompts.label,
            mask,
        })
    }
}
