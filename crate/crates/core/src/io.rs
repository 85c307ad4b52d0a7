//! JSON encodings for instances and solutions.
//!
//! Instance files carry every number as a string so that values are read
//! exactly; binary floating point never touches an input coordinate.
//!
//! ```json
//! {"m": 1,
//!  "requests": [{"id": 1, "pos": "0", "arrival": "0"}],
//!  "servers":  [{"id": 1, "pos": "4", "arrival": "0"}]}
//! ```

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::instance::{
    solution_cost, Agent, Instance, InstanceError, MatchRecord, RequestId, Role, ServerId, Solution,
    SolutionError,
};
use crate::num::Q;

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("cardinality mismatch: {requests} requests vs {servers} servers")]
    CardinalityMismatch { requests: usize, servers: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

fn field_err(path: &str, message: impl Into<String>) -> ParseError {
    ParseError::Field { path: path.to_string(), message: message.into() }
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ParseError> {
    obj.get(key).ok_or_else(|| field_err(&format!("{path}.{key}"), "missing field"))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| field_err(path, "expected an object"))
}

fn as_u32(v: &Value, path: &str) -> Result<u32, ParseError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| field_err(path, format!("expected a non-negative integer, found {v}")))
}

/// Accepts a string holding a decimal or `p/q`, or a bare JSON number read
/// from its literal text (never through `f64`).
fn as_exact(v: &Value, path: &str) -> Result<Q, ParseError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(field_err(path, format!("expected a decimal string, found {other}"))),
    };
    Q::parse_exact(&text).map_err(|e| field_err(path, e.to_string()))
}

fn read_agents(root: &Map<String, Value>, key: &str, role: Role) -> Result<Vec<Agent>, ParseError> {
    let list = get(root, key, "$")?
        .as_array()
        .ok_or_else(|| field_err(&format!("$.{key}"), "expected an array"))?;
    list.iter()
        .enumerate()
        .map(|(i, item)| {
            let path = format!("$.{key}[{i}]");
            let obj = as_object(item, &path)?;
            let id = as_u32(get(obj, "id", &path)?, &format!("{path}.id"))?;
            let pos = as_exact(get(obj, "pos", &path)?, &format!("{path}.pos"))?;
            let arrival_path = format!("{path}.arrival");
            let arrival = as_exact(get(obj, "arrival", &path)?, &arrival_path)?;
            if arrival.is_negative() {
                return Err(field_err(&arrival_path, format!("negative arrival {arrival}")));
            }
            Ok(Agent { id, role, pos, arrival })
        })
        .collect()
}

pub fn read_instance(bytes: &[u8]) -> Result<Instance, ParseError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let root = as_object(&value, "$")?;
    let requests = read_agents(root, "requests", Role::Request)?;
    let servers = read_agents(root, "servers", Role::Server)?;
    if requests.len() != servers.len() {
        return Err(ParseError::CardinalityMismatch { requests: requests.len(), servers: servers.len() });
    }
    if let Some(m) = root.get("m") {
        let m = as_u32(m, "$.m")? as usize;
        if m != requests.len() {
            return Err(field_err("$.m", format!("m = {m} but {} requests listed", requests.len())));
        }
    }
    Ok(Instance::new(requests, servers)?)
}

/// Decimal text when the value terminates, `p/q` otherwise.
fn exact_text(q: &Q) -> String {
    q.to_terminating_decimal().unwrap_or_else(|| q.to_string())
}

pub fn instance_to_value(inst: &Instance) -> Value {
    let agents = |list: &[Agent]| -> Vec<Value> {
        list.iter()
            .map(|a| json!({"id": a.id, "pos": exact_text(&a.pos), "arrival": exact_text(&a.arrival)}))
            .collect()
    };
    json!({
        "m": inst.m(),
        "requests": agents(inst.requests()),
        "servers": agents(inst.servers()),
    })
}

pub fn write_instance(inst: &Instance) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&instance_to_value(inst)).expect("instance serializes");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    schema_version: u32,
    distance_total: &'a Q,
    delay_total: &'a Q,
    total: &'a Q,
    pairs: &'a [crate::instance::PairCost],
}

/// Solution with its per-pair cost breakdown; rationals are written as `p/q`.
pub fn write_solution(inst: &Instance, sol: &Solution) -> Result<Vec<u8>, SolutionError> {
    let cost = solution_cost(inst, sol)?;
    let file = SolutionFile {
        schema_version: SOLUTION_SCHEMA_VERSION,
        distance_total: &cost.distance_total,
        delay_total: &cost.delay_total,
        total: &cost.total,
        pairs: &cost.pairs,
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("solution serializes");
    out.push(b'\n');
    Ok(out)
}

/// Reads the pairs back from a solution file and validates them against `inst`.
pub fn read_solution(inst: &Instance, bytes: &[u8]) -> Result<Solution, ParseError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Json(e.to_string()))?;
    let root = as_object(&value, "$")?;
    let pairs = get(root, "pairs", "$")?
        .as_array()
        .ok_or_else(|| field_err("$.pairs", "expected an array"))?;
    let mut records = Vec::with_capacity(pairs.len());
    for (i, item) in pairs.iter().enumerate() {
        let path = format!("$.pairs[{i}]");
        let obj = as_object(item, &path)?;
        records.push(MatchRecord {
            request: RequestId(as_u32(get(obj, "request", &path)?, &format!("{path}.request"))?),
            server: ServerId(as_u32(get(obj, "server", &path)?, &format!("{path}.server"))?),
            time: as_exact(get(obj, "match_time", &path)?, &format!("{path}.match_time"))?,
        });
    }
    let sol = Solution::new(records);
    sol.validate(inst)?;
    Ok(sol)
}
