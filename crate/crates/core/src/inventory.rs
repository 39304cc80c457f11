//! Charger inventory ingestion (OpenChargeMap-style JSON) and the plug-weighted
//! power rating distribution.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub id: String,
    pub rating_kw: f64,
    pub plug_count: u64,
}

/// Where each field lives in the payload. When `connections` is set, every
/// element of that array on a site becomes one record; otherwise the site
/// object itself is the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapping {
    pub connections: Option<String>,
    pub id: String,
    pub rating_kw: String,
    /// Plug count field; missing or null counts as one plug.
    pub plug_count: String,
}

impl Default for FieldMapping {
    /// OpenChargeMap POI layout.
    fn default() -> Self {
        Self {
            connections: Some("Connections".into()),
            id: "ID".into(),
            rating_kw: "PowerKW".into(),
            plug_count: "Quantity".into(),
        }
    }
}

/// Entries dropped during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipReport {
    pub missing_rating: usize,
    pub invalid: usize,
    pub entries: Vec<String>,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.missing_rating + self.invalid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub records: Vec<StationRecord>,
    pub skipped: SkipReport,
}

/// Settings for a live endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchOptions {
    pub api_key_header: String,
    pub api_key: Option<String>,
    pub timeout_secs: u64,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            api_key_header: "X-API-Key".into(),
            api_key: None,
            timeout_secs: 30,
        }
    }
}

fn is_url(source: &str) -> bool {
    source.starts_with("http://") || source.starts_with("https://")
}

/// Reads an inventory from a URL (HTTP GET) or a snapshot file with the same
/// payload format.
pub fn fetch_inventory(source: &str, mapping: &FieldMapping, opts: &FetchOptions) -> Result<Inventory> {
    let text = if is_url(source) {
        fetch_url(source, opts)?
    } else {
        std::fs::read_to_string(Path::new(source))?
    };
    parse_inventory(&text, mapping)
}

#[cfg(feature = "fetch")]
fn fetch_url(url: &str, opts: &FetchOptions) -> Result<String> {
    let mut req = ureq::get(url);
    if let Some(key) = &opts.api_key {
        req = req.header(opts.api_key_header.as_str(), key.as_str());
    }
    let mut resp = req
        .config()
        .timeout_global(Some(std::time::Duration::from_secs(opts.timeout_secs)))
        .build()
        .call()
        .map_err(|e| Error::Fetch(format!("GET {url}: {e}")))?;
    resp.body_mut()
        .read_to_string()
        .map_err(|e| Error::Fetch(format!("GET {url}: reading body: {e}")))
}

#[cfg(not(feature = "fetch"))]
fn fetch_url(url: &str, _opts: &FetchOptions) -> Result<String> {
    Err(Error::Fetch(format!(
        "GET {url}: built without the `fetch` feature"
    )))
}

fn field_str(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parses a JSON array payload into validated records.
pub fn parse_inventory(text: &str, mapping: &FieldMapping) -> Result<Inventory> {
    let payload: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let Value::Array(sites) = payload else {
        return Err(Error::Parse {
            line: 1,
            message: "inventory payload is not a JSON array".into(),
        });
    };

    let mut records = Vec::new();
    let mut skipped = SkipReport::default();
    for (i, site) in sites.iter().enumerate() {
        let site_id = site
            .get(&mapping.id)
            .and_then(field_str)
            .unwrap_or_else(|| format!("#{i}"));
        let entries: Vec<(String, &Value)> = match &mapping.connections {
            Some(field) => match site.get(field) {
                Some(Value::Array(conns)) => conns
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (format!("{site_id}/{k}"), c))
                    .collect(),
                _ => {
                    skipped.missing_rating += 1;
                    skipped.entries.push(format!("{site_id}: no `{field}` array"));
                    continue;
                }
            },
            None => vec![(site_id, site)],
        };
        for (id, entry) in entries {
            let rating = match entry.get(&mapping.rating_kw) {
                None | Some(Value::Null) => {
                    skipped.missing_rating += 1;
                    skipped.entries.push(format!("{id}: missing rating"));
                    continue;
                }
                Some(v) => v.as_f64(),
            };
            let count = match entry.get(&mapping.plug_count) {
                None | Some(Value::Null) => Some(1),
                Some(v) => v.as_u64(),
            };
            match (rating, count) {
                (Some(r), Some(n)) if r > 0.0 && r.is_finite() => records.push(StationRecord {
                    id,
                    rating_kw: r,
                    plug_count: n,
                }),
                _ => {
                    skipped.invalid += 1;
                    skipped.entries.push(format!("{id}: invalid rating or plug count"));
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInventory(format!(
            "no usable records ({} entries skipped)",
            skipped.total()
        )));
    }
    Ok(Inventory { records, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingShare {
    pub rating_kw: f64,
    pub plugs: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingDistribution {
    /// Ascending by rating.
    pub shares: Vec<RatingShare>,
    pub modal_rating_kw: f64,
    pub modal_share: f64,
    pub total_plugs: u64,
}

impl RatingDistribution {
    pub fn share_of(&self, rating_kw: f64) -> f64 {
        self.shares
            .iter()
            .find(|s| s.rating_kw == rating_kw)
            .map_or(0.0, |s| s.share)
    }
}

/// Plug-weighted histogram of ratings. The modal rating breaks ties toward the
/// lower rating.
pub fn rating_distribution(records: &[StationRecord]) -> Result<RatingDistribution> {
    let mut sorted: Vec<(f64, u64)> = records.iter().map(|r| (r.rating_kw, r.plug_count)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins: Vec<(f64, u64)> = Vec::new();
    for (rating, plugs) in sorted {
        match bins.last_mut() {
            Some((r, n)) if *r == rating => *n += plugs,
            _ => bins.push((rating, plugs)),
        }
    }
    let total: u64 = bins.iter().map(|b| b.1).sum();
    if total == 0 {
        return Err(Error::EmptyInventory("inventory has no plugs".into()));
    }
    let shares: Vec<RatingShare> = bins
        .iter()
        .map(|&(rating_kw, plugs)| RatingShare {
            rating_kw,
            plugs,
            share: plugs as f64 / total as f64,
        })
        .collect();
    // ascending order + strict comparison keeps the lowest rating on ties
    let modal = shares
        .iter()
        .fold(&shares[0], |best, s| if s.plugs > best.plugs { s } else { best });
    Ok(RatingDistribution {
        modal_rating_kw: modal.rating_kw,
        modal_share: modal.share,
        total_plugs: total,
        shares,
    })
}
