//! Reference implementations written directly in Rust, sharing no code
//! with the interpreter or the corpus.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

/// The scalar values that appear in generated traces.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub enum Val {
    Nil,
    Num(f64),
    Str(String),
}

impl Val {
    pub fn literal(&self) -> String {
        match self {
            Val::Nil => "nil".to_string(),
            Val::Num(n) => format!("{n}"),
            Val::Str(s) => format!("{s:?}"),
        }
    }

    fn key(&self) -> String {
        self.literal()
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub method: String,
    pub args: Vec<Val>,
    pub result: Val,
}

pub fn trace_literal(trace: &[Event]) -> String {
    let events: Vec<String> = trace
        .iter()
        .map(|e| {
            let args: Vec<String> = e.args.iter().map(Val::literal).collect();
            format!("{{:method {:?} :args [{}] :result {}}}", e.method, args.join(" "), e.result.literal())
        })
        .collect();
    format!("[{}]", events.join(" "))
}

pub type Env = BTreeMap<String, Val>;

/// `None` means the guard raised an error, which rejects the transition.
pub type Guard = fn(&[Val], &Val, &Env) -> Option<bool>;

pub struct Transition {
    pub from: &'static str,
    pub to: &'static str,
    pub method: &'static str,
    pub binds: Option<&'static str>,
    pub guard: Option<Guard>,
}

pub struct Nfa {
    pub start: &'static str,
    pub accept: &'static [&'static str],
    pub transitions: Vec<Transition>,
}

fn var(env: &Env, name: &str) -> Val {
    env.get(name).cloned().unwrap_or(Val::Nil)
}

impl Nfa {
    /// Explores every configuration (state plus variable bindings)
    /// reachable along the trace.
    pub fn accepts(&self, trace: &[Event]) -> bool {
        let mut configs: Vec<(&str, Env)> = vec![(self.start, Env::new())];
        for event in trace {
            let mut next: Vec<(&str, Env)> = Vec::new();
            let mut seen = BTreeSet::new();
            for (state, env) in &configs {
                for t in &self.transitions {
                    if t.from != *state || t.method != event.method {
                        continue;
                    }
                    if let Some(g) = t.guard {
                        if g(&event.args, &event.result, env) != Some(true) {
                            continue;
                        }
                    }
                    let mut env = env.clone();
                    if let Some(v) = t.binds {
                        env.insert(v.to_string(), event.result.clone());
                    }
                    let key = (t.to, env.iter().map(|(k, v)| (k.clone(), v.key())).collect::<Vec<_>>());
                    if seen.insert(key) {
                        next.push((t.to, env));
                    }
                }
            }
            configs = next;
        }
        configs.iter().any(|(s, _)| self.accept.contains(s))
    }

    pub fn methods(&self) -> Vec<&'static str> {
        let set: BTreeSet<&str> = self.transitions.iter().map(|t| t.method).collect();
        set.into_iter().collect()
    }
}

/// start -auth[binds t]-> good; good -req[(nth args 1) = t]-> good;
/// good -done-> end.
pub fn auth() -> Nfa {
    Nfa {
        start: "start",
        accept: &["end"],
        transitions: vec![
            Transition { from: "start", to: "good", method: "auth", binds: Some("t"), guard: None },
            Transition {
                from: "good",
                to: "good",
                method: "req",
                binds: None,
                guard: Some(|args, _, env| args.get(1).map(|a| *a == var(env, "t"))),
            },
            Transition { from: "good", to: "end", method: "done", binds: None, guard: None },
        ],
    }
}

fn first_is_handle(args: &[Val], _: &Val, env: &Env) -> Option<bool> {
    Some(args.first().cloned().unwrap_or(Val::Nil) == var(env, "h"))
}

fn seek_ok(args: &[Val], result: &Val, env: &Env) -> Option<bool> {
    if !first_is_handle(args, result, env)? {
        return Some(false);
    }
    let pos = match args.get(1) {
        Some(Val::Num(n)) => *n,
        _ => return None,
    };
    if pos < 0.0 {
        return Some(false);
    }
    match var(env, "d") {
        Val::Num(d) => Some(pos <= d),
        _ => None,
    }
}

pub fn mediaplayer() -> Nfa {
    let t = |from, to, method, binds, guard| Transition { from, to, method, binds, guard };
    Nfa {
        start: "idle",
        accept: &["idle", "stopped"],
        transitions: vec![
            t("idle", "ready", "open", Some("h"), None),
            t("ready", "ready", "getDuration", Some("d"), Some(first_is_handle as Guard)),
            t("ready", "playing", "play", None, Some(first_is_handle as Guard)),
            t("playing", "playing", "seekTo", None, Some(seek_ok as Guard)),
            t("playing", "paused", "pause", None, None),
            t("paused", "playing", "play", None, Some(first_is_handle as Guard)),
            t("playing", "stopped", "stop", None, None),
            t("paused", "stopped", "stop", None, None),
            t("playing", "playing", "tick", None, None),
            t("playing", "playing", "tick", Some("d"), None),
        ],
    }
}

fn pool() -> Vec<Val> {
    vec![
        Val::Str("h1".into()),
        Val::Str("h2".into()),
        Val::Str("t1".into()),
        Val::Str("/inbox".into()),
        Val::Num(0.0),
        Val::Num(10.0),
        Val::Num(90.0),
        Val::Num(120.0),
        Val::Num(500.0),
        Val::Num(-5.0),
        Val::Nil,
    ]
}

fn pick(rng: &mut impl Rng, env: &Env) -> Val {
    let bound: Vec<&Val> = env.values().collect();
    if !bound.is_empty() && rng.gen_bool(0.6) {
        bound.choose(rng).map(|v| (*v).clone()).unwrap_or(Val::Nil)
    } else {
        pool().choose(rng).cloned().unwrap_or(Val::Nil)
    }
}

/// Half of the traces follow a random walk through the machine, building
/// arguments from values bound so far and stopping at dead ends; the rest draw every event at random
/// (including a method the machine does not know).
pub fn random_trace(nfa: &Nfa, rng: &mut impl Rng, max_len: usize) -> Vec<Event> {
    let len = rng.gen_range(0..=max_len);
    let mut methods = nfa.methods();
    methods.push("unknown");
    let guided = rng.gen_bool(0.5);
    let mut state = nfa.start;
    let mut env = Env::new();
    let mut trace = Vec::with_capacity(len);
    for _ in 0..len {
        let nargs = rng.gen_range(0..=2);
        let args: Vec<Val> = (0..nargs).map(|_| pick(rng, &env)).collect();
        let result = pool().choose(rng).cloned().unwrap_or(Val::Nil);
        let method = if guided {
            let outgoing: Vec<&Transition> = nfa.transitions.iter().filter(|t| t.from == state).collect();
            match outgoing.choose(rng) {
                Some(t) => {
                    state = t.to;
                    if let Some(v) = t.binds {
                        env.insert(v.to_string(), result.clone());
                    }
                    t.method
                }
                // A walk that reaches a dead end stops there.
                None => break,
            }
        } else {
            methods.choose(rng).copied().unwrap_or("unknown")
        };
        trace.push(Event { method: method.to_string(), args, result });
    }
    trace
}

/// Point at parameter `t` on the quadratic curve with controls `a`, `b`, `c`.
pub fn de_casteljau(a: [f64; 2], b: [f64; 2], c: [f64; 2], t: f64) -> [f64; 2] {
    let lerp = |p: [f64; 2], q: [f64; 2]| [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t];
    lerp(lerp(a, b), lerp(b, c))
}
