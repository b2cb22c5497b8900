//! Newline-delimited JSON protocol between an editor and an edit session.
//!
//! Every message is `{"id": n, "kind": "...", "payload": {...}}` on one
//! line. Client requests (`open`, `change`, `event`, `close`) each get
//! exactly one reply carrying the request id; everything else the server
//! sends unprompted carries id 0.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::reader::Span;
use crate::session::{Diagnostic, InstanceInfo, Session, SessionConfig, TextEdit};
use crate::view::ViewNode;
use crate::visr::Registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub id: u64,
    pub kind: String,
    #[serde(default)]
    pub payload: serde_json::Value,
}

impl Envelope {
    pub fn new(id: u64, kind: &str, payload: serde_json::Value) -> Self {
        Envelope { id, kind: kind.to_string(), payload }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelopes always serialize")
    }
}

#[derive(Debug, Deserialize)]
struct OpenPayload {
    text: String,
}

/// Either an edit against a known version or a whole new text.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ChangePayload {
    Edit(TextEdit),
    Full { text: String },
}

#[derive(Debug, Deserialize)]
struct EventPayload {
    instance_id: u64,
    handler_id: String,
    #[serde(default)]
    payload: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct InstancesPayload<'a> {
    version: u64,
    instances: &'a [InstanceInfo],
}

#[derive(Debug, Serialize)]
struct ViewPayload<'a> {
    instance_id: u64,
    tree: &'a ViewNode,
}

#[derive(Debug, Serialize)]
struct DiagnosticsPayload<'a> {
    diagnostics: &'a [Diagnostic],
}

/// How sessions are created for a connection.
#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Directories searched for extension modules.
    pub paths: Vec<PathBuf>,
    pub config: SessionConfig,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions { paths: vec![PathBuf::from(".")], config: SessionConfig::default() }
    }
}

/// Protocol state for one connection: at most one open buffer.
pub struct Server {
    options: ServerOptions,
    session: Option<Session>,
}

impl Server {
    pub fn new(options: ServerOptions) -> Self {
        Server { options, session: None }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    /// Handles one input line, returning the output lines.
    pub fn handle_line(&mut self, line: &str) -> Vec<String> {
        let replies = match serde_json::from_str::<Envelope>(line) {
            Ok(msg) => self.handle(&msg),
            Err(e) => vec![error(0, format!("parse error: {e}"))],
        };
        replies.iter().map(Envelope::to_line).collect()
    }

    pub fn handle(&mut self, msg: &Envelope) -> Vec<Envelope> {
        let id = msg.id;
        match msg.kind.as_str() {
            "open" => match payload::<OpenPayload>(msg) {
                Ok(p) => {
                    let registry = Registry::with_paths(self.options.paths.clone());
                    let session = Session::open(&p.text, registry, self.options.config);
                    let ids = session.instance_ids();
                    let session = self.session.insert(session);
                    let mut out = vec![instances(id, session)];
                    out.extend(views(session, &ids));
                    out.push(diagnostics(session));
                    out
                }
                Err(e) => vec![e],
            },
            "change" => {
                let Some(session) = self.session.as_mut() else {
                    return vec![error(id, "no open buffer".to_string())];
                };
                let rerendered = match payload::<ChangePayload>(msg) {
                    Ok(ChangePayload::Edit(edit)) => match session.apply_edit(&edit) {
                        Ok(ids) => ids,
                        Err(e) => return vec![error(id, e.to_string())],
                    },
                    Ok(ChangePayload::Full { text }) => session.replace_text(&text),
                    Err(e) => return vec![e],
                };
                let mut out = vec![instances(id, session)];
                out.extend(views(session, &rerendered));
                out.push(diagnostics(session));
                out
            }
            "event" => {
                let Some(session) = self.session.as_mut() else {
                    return vec![error(id, "no open buffer".to_string())];
                };
                let p = match payload::<EventPayload>(msg) {
                    Ok(p) => p,
                    Err(e) => return vec![e],
                };
                let outcome = match session.dispatch_event(p.instance_id, &p.handler_id, &p.payload) {
                    Ok(o) => o,
                    Err(e) => return vec![error(id, e.to_string())],
                };
                let mut out = Vec::new();
                if let Some(edit) = &outcome.edit {
                    if let Err(e) = session.apply_edit(edit) {
                        return vec![error(id, e.to_string())];
                    }
                    out.push(Envelope::new(0, "edit", json!(edit)));
                    out.push(instances(0, session));
                }
                out.push(view(id, p.instance_id, &outcome.tree));
                out.push(diagnostics(session));
                out
            }
            "close" => {
                self.session = None;
                vec![Envelope::new(id, "instances", json!(InstancesPayload { version: 0, instances: &[] }))]
            }
            other => vec![error(id, format!("unknown message kind {other:?}"))],
        }
    }
}

fn payload<T: serde::de::DeserializeOwned>(msg: &Envelope) -> Result<T, Envelope> {
    serde_json::from_value(msg.payload.clone())
        .map_err(|e| error(msg.id, format!("invalid {} payload: {e}", msg.kind)))
}

fn error(id: u64, message: String) -> Envelope {
    Envelope::new(id, "error", json!({ "message": message }))
}

fn instances(id: u64, session: &Session) -> Envelope {
    let list = session.instances();
    Envelope::new(id, "instances", json!(InstancesPayload { version: session.buffer().version, instances: &list }))
}

fn view(id: u64, instance_id: u64, tree: &ViewNode) -> Envelope {
    Envelope::new(id, "view", json!(ViewPayload { instance_id, tree }))
}

fn views(session: &Session, ids: &[u64]) -> Vec<Envelope> {
    ids.iter().filter_map(|&i| session.view(i).map(|t| view(0, i, t))).collect()
}

fn diagnostics(session: &Session) -> Envelope {
    let list = session.diagnostics();
    Envelope::new(0, "diagnostics", json!(DiagnosticsPayload { diagnostics: &list }))
}

/// Serves one connection until its input ends.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W, options: ServerOptions) -> std::io::Result<()> {
    let mut server = Server::new(options);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for reply in server.handle_line(&line) {
            output.write_all(reply.as_bytes())?;
            output.write_all(b"\n")?;
        }
        output.flush()?;
    }
    Ok(())
}

pub fn serve_stdio(options: ServerOptions) -> std::io::Result<()> {
    serve(std::io::stdin().lock(), std::io::stdout().lock(), options)
}

/// Accepts connections forever, one thread and one session per connection.
pub fn serve_tcp(addr: impl ToSocketAddrs, options: ServerOptions) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr)?;
    serve_listener(listener, options)
}

pub fn serve_listener(listener: TcpListener, options: ServerOptions) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let options = options.clone();
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve(reader, stream, options);
        });
    }
    Ok(())
}

/// Span helper for clients building `change` messages.
pub fn change_message(id: u64, span: Span, replacement: &str, base_version: u64) -> Envelope {
    Envelope::new(id, "change", json!(TextEdit { span, replacement: replacement.to_string(), base_version }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server() -> Server {
        Server::new(ServerOptions { paths: vec![], config: SessionConfig::uniform(crate::interp::Fuel::new(10_000)) })
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let out = server().handle_line("{");
        assert_eq!(out.len(), 1);
        let msg: Envelope = serde_json::from_str(&out[0]).unwrap();
        assert_eq!(msg.kind, "error");
        assert_eq!(msg.id, 0);
        assert!(msg.payload["message"].as_str().unwrap().contains("parse"));
    }

    #[test]
    fn unknown_kind_and_missing_session() {
        let mut s = server();
        let out: Vec<Envelope> =
            s.handle_line(r#"{"id":3,"kind":"frobnicate","payload":{}}"#).iter().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!((out[0].id, out[0].kind.as_str()), (3, "error"));
        let out = s.handle(&Envelope::new(4, "event", json!({"instance_id": 1, "handler_id": "h0"})));
        assert_eq!((out[0].id, out[0].kind.as_str()), (4, "error"));
    }

    #[test]
    fn open_plain_text() {
        let mut s = server();
        let out = s.handle(&Envelope::new(1, "open", json!({"text": "(+ 1 2)"})));
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].id, out[0].kind.as_str()), (1, "instances"));
        assert_eq!(out[1].kind, "diagnostics");
        let out = s.handle(&Envelope::new(2, "close", json!({})));
        assert_eq!((out[0].id, out[0].kind.as_str()), (2, "instances"));
    }
}
