//! Browser entry points. Every function takes and returns JSON strings so the
//! page needs no generated TypeScript types; failures come back as
//! `{"error": "..."}`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use simspace::data::numbered_ids;
use simspace::mapping::{conceptual_distance, triangulate, Domain, DomainPartition};
use simspace::mds::{smacof, SmacofConfig};
use simspace::synthetic::random_dissimilarity;
use simspace::{DissimilarityMatrix, Seed, StimulusId};

#[derive(Deserialize)]
struct MdsRequest {
    /// Stimulus labels; generated when absent.
    #[serde(default)]
    ids: Option<Vec<String>>,
    /// Square matrix, or absent for a random one of size `n`.
    #[serde(default)]
    matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    n: Option<usize>,
    dims: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct MdsResponse {
    ids: Vec<String>,
    coords: Vec<Vec<f64>>,
    stress1: f64,
    iterations: usize,
}

#[derive(Deserialize)]
struct TriangulateRequest {
    anchors: Vec<Vec<f64>>,
    distances: Vec<f64>,
}

#[derive(Deserialize)]
struct DistanceRequest {
    p: Vec<f64>,
    q: Vec<f64>,
    /// Groups of dimension indices; absent means one domain over all of them.
    #[serde(default)]
    domains: Option<Vec<Vec<usize>>>,
}

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn parse<'a, T: Deserialize<'a>>(json: &'a str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

fn mds(req: MdsRequest) -> Result<MdsResponse, String> {
    let s = |e: simspace::Error| e.to_string();
    let delta = match req.matrix {
        Some(rows) => {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err("matrix must be square".into());
            }
            let ids = match req.ids {
                Some(ids) => ids.into_iter().map(StimulusId::new).collect::<Result<_, _>>().map_err(s)?,
                None => numbered_ids("s", n),
            };
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            DissimilarityMatrix::new(ids, simspace::nalgebra::DMatrix::from_row_slice(n, n, &flat))
                .map_err(s)?
        }
        None => random_dissimilarity(req.n.unwrap_or(12), Seed(req.seed)).map_err(s)?,
    };
    let cfg = SmacofConfig {
        seed: Seed(req.seed),
        ..SmacofConfig::with_dims(req.dims)
    };
    let (emb, trace) = smacof(&delta, &cfg).map_err(s)?;
    Ok(MdsResponse {
        ids: emb.ids().iter().map(|i| i.to_string()).collect(),
        coords: (0..emb.len()).map(|i| emb.point(i)).collect(),
        stress1: emb.stress1(),
        iterations: trace.iterations(),
    })
}

/// Scales a dissimilarity matrix. Request:
/// `{"dims": 2, "matrix": [[..]], "ids": [..], "seed": 0}` or `{"dims": 2, "n": 12}`.
#[wasm_bindgen]
pub fn run_mds(request: &str) -> String {
    respond(parse(request).and_then(mds))
}

/// Request: `{"anchors": [[x, y], ..], "distances": [d, ..]}`; returns `{"point": [..]}`.
#[wasm_bindgen]
pub fn run_triangulate(request: &str) -> String {
    respond(parse::<TriangulateRequest>(request).and_then(|r| {
        triangulate(&r.anchors, &r.distances)
            .map(|point| serde_json::json!({ "point": point }))
            .map_err(|e| e.to_string())
    }))
}

/// Request: `{"p": [..], "q": [..], "domains": [[0, 1], [2]]}`; returns `{"distance": d}`.
#[wasm_bindgen]
pub fn run_conceptual_distance(request: &str) -> String {
    respond(parse::<DistanceRequest>(request).and_then(|r| {
        let partition = match r.domains {
            Some(groups) => DomainPartition::new(
                groups
                    .into_iter()
                    .enumerate()
                    .map(|(i, dims)| Domain { name: format!("domain_{i}"), dims })
                    .collect(),
            ),
            None => DomainPartition::single(r.p.len()),
        }
        .map_err(|e| e.to_string())?;
        conceptual_distance(&r.p, &r.q, &partition)
            .map(|d| serde_json::json!({ "distance": d }))
            .map_err(|e| e.to_string())
    }))
}
