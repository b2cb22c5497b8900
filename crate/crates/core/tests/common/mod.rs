//! Shared fixtures for the integration tests: corpus access, value
//! generators and the independent oracles.
#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use visr_core::interp::{Fuel, Value, ValueMap};
use visr_core::pipeline::{self, Budgets, RunOutput};
use visr_core::session::{Session, SessionConfig};
use visr_core::visr::Registry;

pub const ENTRIES: [&str; 5] = ["counter", "bezier", "auth", "mediaplayer", "gradeform"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn lib_dir() -> PathBuf {
    corpus_dir().join("lib")
}

pub fn registry() -> Registry {
    Registry::with_paths(vec![lib_dir()])
}

pub fn entry_file(entry: &str, file: &str) -> String {
    let path = corpus_dir().join(entry).join(file);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn budgets() -> Budgets {
    Budgets { elaborate: Fuel::ELABORATE_DEFAULT, run: pipeline::RUN_FUEL }
}

pub fn config() -> SessionConfig {
    SessionConfig { render_fuel: Fuel::RENDER_DEFAULT, elaborate_fuel: Fuel::ELABORATE_DEFAULT }
}

pub fn run(text: &str) -> RunOutput {
    pipeline::run(text, &mut registry(), budgets()).unwrap_or_else(|e| panic!("{}", e.located(text)))
}

pub fn open(text: &str) -> Session {
    Session::open(text, registry(), config())
}

pub fn payload(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Payloads to try for an event: drags carry pointer coordinates, input
/// changes carry a value.
pub fn payload_for(event: &str) -> BTreeMap<String, String> {
    match event {
        "drag" => payload(&[("x", "1.25"), ("y", "2.5")]),
        "change" => payload(&[("value", "42")]),
        _ => BTreeMap::new(),
    }
}

pub fn kw_map(entries: Vec<(&str, Value)>) -> Value {
    Value::map(entries.into_iter().map(|(k, v)| (Value::keyword(k), v)).collect::<ValueMap>())
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1000i64..1000).prop_map(|n| n as f64),
        any::<i32>().prop_map(|n| n as f64 / 64.0),
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
        Just(1e300),
        Just(5e-324),
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{0,8}",
        "\\PC{0,12}",
        Just("quote \" backslash \\ newline \n tab \t".to_string()),
    ]
}

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9?!*-]{0,7}"
}

pub fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Nil),
        any::<bool>().prop_map(Value::Bool),
        number().prop_map(Value::Number),
        text().prop_map(|s| Value::str(&s)),
        name().prop_map(|s| Value::keyword(&s)),
    ]
}

/// Arbitrary serializable values: scalars, lists, vectors and maps.
pub fn data() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::list),
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::vector),
            prop::collection::btree_map(leaf(), inner, 0..6).prop_map(Value::map),
        ]
    })
}

/// A state map for an extension with the given fields: each field gets an
/// arbitrary value, plus occasionally an extra key the schema does not know.
pub fn state_for(fields: Vec<String>) -> impl Strategy<Value = Value> {
    let n = fields.len();
    (prop::collection::vec(data(), n), prop::option::of((name(), data()))).prop_map(move |(values, extra)| {
        let mut map: ValueMap = fields.iter().zip(values).map(|(f, v)| (Value::keyword(f), v)).collect();
        if let Some((k, v)) = extra {
            map.insert(Value::keyword(&format!("extra-{k}")), v);
        }
        Value::map(map)
    })
}

/// The first instance in a corpus sample.
pub fn sample_instance(entry: &str) -> visr_core::visr::InstanceSyntax {
    let text = entry_file(entry, "sample.mls");
    let forms = visr_core::reader::read_all(&text).unwrap();
    visr_core::visr::scan_instances(&forms).0.remove(0)
}

/// Verdicts of the elaborated state machine `state_text` on each trace,
/// from a single elaboration.
pub fn machine_verdicts(state_text: &str, traces: &[Vec<oracles::Event>]) -> Vec<bool> {
    let literals: Vec<String> = traces.iter().map(|t| oracles::trace_literal(t)).collect();
    let program = format!(
        "(def accepts? ^:visr (protocol.statemachine/Machine {}))\n(mapv accepts? [{}])",
        visr_core::reader::quote_string(state_text),
        literals.join("\n")
    );
    let out = run(&program);
    out.value
        .as_seq()
        .expect("a vector of verdicts")
        .iter()
        .map(|v| match v {
            Value::Bool(b) => *b,
            other => panic!("verdict {other} is not a boolean"),
        })
        .collect()
}

/// The first `n` points of the sample's subdivision for arbitrary controls.
pub fn bezier_points(a: [f64; 2], b: [f64; 2], c: [f64; 2], depth: u32) -> Vec<[f64; 2]> {
    let sample = entry_file("bezier", "sample.mls");
    let defn = sample.split("(defn show").next().unwrap();
    let lit = |p: [f64; 2]| format!("[{} {}]", visr_core::reader::format_number(p[0]), visr_core::reader::format_number(p[1]));
    let program = format!("{defn}\n(bezier {} {} {} {depth})", lit(a), lit(b), lit(c));
    let out = run(&program);
    out.value
        .as_seq()
        .unwrap()
        .iter()
        .map(|p| {
            let xy = p.as_seq().unwrap();
            let num = |v: &Value| match v {
                Value::Number(n) => *n,
                other => panic!("coordinate {other} is not a number"),
            };
            [num(&xy[0]), num(&xy[1])]
        })
        .collect()
}

/// Every (event, handler id) pair in a view, in pre-order.
pub fn handlers(tree: &visr_core::view::ViewNode) -> Vec<(String, String)> {
    let mut out = Vec::new();
    tree.walk(&mut |n| out.extend(n.handlers.iter().map(|(e, h)| (e.clone(), h.clone()))));
    out
}
