//! Back-translation through a pluggable translation client.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

pub const SOURCE_LANGUAGE: &str = "en";

/// Pivot languages of the cloud-service route list.
pub const ROUTES_A: [&str; 4] = ["zh", "ja", "ko", "hi"];
/// Pivot languages of the neural-MT route list.
pub const ROUTES_B: [&str; 4] = ["fr", "pt", "es", "it"];

/// A machine translation backend.
///
/// Implementations may be shared between threads. A single call is one
/// request; the two legs of a back-translation are issued sequentially by
/// [`back_translate`].
pub trait Translator: Send + Sync {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, String>;
}

/// Returns every text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String, String> {
        Ok(text.to_string())
    }
}

/// Deterministic offline stand-in for a real MT service.
///
/// The outbound leg (`en` to pivot) rearranges the whitespace-separated
/// tokens: one of the `2·len` rotations or reversed rotations, never the
/// identity, picked by a seeded hash of the text plus the pivot's ordinal.
/// The return leg is the identity. Known pivots have fixed consecutive
/// ordinals, so for texts of at least three distinct tokens, pivots within
/// one route list always yield distinct outputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTranslator {
    seed: u64,
}

impl MockTranslator {
    pub fn new(seed: u64) -> Self {
        MockTranslator { seed }
    }

    fn ordinal(route: &str) -> u64 {
        ROUTES_A
            .iter()
            .chain(ROUTES_B.iter())
            .position(|&r| r == route)
            .map(|p| p as u64)
            .unwrap_or_else(|| 8 + seed::derive_seed(0, &["route".into(), route.into()]) % 1024)
    }

    fn rearrange(&self, text: &str, route: &str) -> String {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let len = tokens.len();
        if len < 2 {
            return text.to_string();
        }
        let arrangements = 2 * len as u64;
        let h = seed::derive_seed(self.seed, &["mock-mt".into(), text.into()]);
        let pick =
            1 + (h % (arrangements - 1)).wrapping_add(Self::ordinal(route)) % (arrangements - 1);
        let pick = pick as usize;
        let mut out: Vec<&str> = tokens.clone();
        if pick >= len {
            out.reverse();
        }
        out.rotate_left(pick % len);
        out.join(" ")
    }
}

impl Translator for MockTranslator {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, String> {
        if source == SOURCE_LANGUAGE && target != SOURCE_LANGUAGE {
            Ok(self.rearrange(text, target))
        } else {
            Ok(text.to_string())
        }
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    text: &'a str,
    source: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct TranslateResponse {
    text: String,
}

/// JSON-over-HTTP client: `POST {"text","source","target"}` returning
/// `{"text"}`.
#[derive(Debug, Clone)]
pub struct HttpTranslator {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpTranslator {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpTranslator {
            endpoint: endpoint.into(),
            client,
        })
    }
}

impl Translator for HttpTranslator {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, String> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&TranslateRequest {
                text,
                source,
                target,
            })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| e.to_string())?;
        let body: TranslateResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(body.text)
    }
}

/// Translates `text` to `route` and back. Each leg is attempted up to
/// `1 + retries` times; the final failure carries the route and origin id.
pub fn back_translate(
    text: &str,
    route: &str,
    client: &dyn Translator,
    origin_id: &str,
    retries: usize,
) -> Result<String> {
    let leg = |input: &str, source: &str, target: &str| {
        let mut last = String::new();
        for attempt in 0..=retries {
            match client.translate(input, source, target) {
                Ok(out) => return Ok(out),
                Err(e) => {
                    log::debug!("{origin_id}: {source}->{target} attempt {attempt} failed: {e}");
                    last = e;
                }
            }
        }
        Err(Error::Translation {
            route: route.to_string(),
            origin_id: origin_id.to_string(),
            message: last,
        })
    };
    let pivot = leg(text, SOURCE_LANGUAGE, route)?;
    leg(&pivot, route, SOURCE_LANGUAGE)
}
