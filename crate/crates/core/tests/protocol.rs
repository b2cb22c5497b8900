mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use serde_json::{json, Value as Json};
use visr_core::protocol::{serve, serve_listener, Envelope, Server, ServerOptions};

fn options() -> ServerOptions {
    ServerOptions { paths: vec![common::lib_dir()], config: common::config() }
}

fn line(id: u64, kind: &str, payload: Json) -> String {
    Envelope::new(id, kind, payload).to_line()
}

fn kinds(replies: &[String]) -> Vec<(u64, String)> {
    replies
        .iter()
        .map(|l| {
            let e: Envelope = serde_json::from_str(l).unwrap();
            (e.id, e.kind)
        })
        .collect()
}

fn parse(l: &str) -> Envelope {
    serde_json::from_str(l).unwrap()
}

const COUNTER: &str = "(def n ^:visr (demo.counter/Counter \"{:count 0}\"))\n(println n)\n";

#[test]
fn open_event_change_close() {
    let mut server = Server::new(options());
    let out = server.handle_line(&line(1, "open", json!({ "text": COUNTER })));
    let k = kinds(&out);
    assert_eq!(k, vec![(1, "instances".into()), (0, "view".into()), (0, "diagnostics".into())]);
    let instances = parse(&out[0]).payload;
    assert_eq!(instances["version"], 0);
    assert_eq!(instances["instances"][0]["extension_ref"], "demo.counter/Counter");
    assert_eq!(instances["instances"][0]["state_text"], "{:count 0}");
    let view = parse(&out[1]).payload;
    assert_eq!(view["tree"]["tag"], "row");
    let id = view["instance_id"].as_u64().unwrap();
    let handler = view["tree"]["children"][1]["handlers"]["click"].as_str().unwrap().to_string();

    let out = server.handle_line(&line(2, "event", json!({ "instance_id": id, "handler_id": handler })));
    assert_eq!(
        kinds(&out),
        vec![(0, "edit".into()), (0, "instances".into()), (2, "view".into()), (0, "diagnostics".into())]
    );
    let edit = parse(&out[0]).payload;
    assert_eq!(edit["replacement"], "\"{:count 1}\"");
    assert_eq!(edit["base_version"], 0);
    assert_eq!(parse(&out[1]).payload["version"], 1);
    assert!(server.session().unwrap().buffer().text.contains("{:count 1}"));

    // A client edit against a stale version is refused.
    let out = server.handle_line(&line(3, "change", json!({ "span": {"start": 0, "end": 0}, "replacement": " ", "base_version": 0 })));
    assert_eq!(kinds(&out), vec![(3, "error".into())]);
    let out = server.handle_line(&line(4, "change", json!({ "text": "(+ 1 2)" })));
    assert_eq!(kinds(&out)[0], (4, "instances".into()));
    assert_eq!(parse(&out[0]).payload["instances"], json!([]));

    let out = server.handle_line(&line(5, "close", json!({})));
    assert_eq!(kinds(&out), vec![(5, "instances".into())]);
    let out = server.handle_line(&line(6, "event", json!({ "instance_id": id, "handler_id": handler })));
    assert_eq!(parse(&out[0]).payload["message"], "no open buffer");
}

fn recorded_log() -> Vec<String> {
    let sample = common::entry_file("gradeform", "sample.mls");
    vec![
        line(1, "open", json!({ "text": sample })),
        line(2, "event", json!({ "instance_id": 1, "handler_id": "h3" })),
        line(3, "event", json!({ "instance_id": 2, "handler_id": "h0", "payload": {"value": "77"} })),
        "not json".to_string(),
        line(4, "change", json!({ "text": COUNTER })),
        line(5, "event", json!({ "instance_id": 4, "handler_id": "h0" })),
        line(6, "event", json!({ "instance_id": 4, "handler_id": "h7" })),
        line(7, "close", json!({})),
    ]
}

#[test]
fn replaying_a_log_is_byte_identical() {
    let replay = || {
        let mut server = Server::new(options());
        recorded_log().iter().flat_map(|l| server.handle_line(l)).collect::<Vec<_>>()
    };
    let first = replay();
    assert!(first.len() > 10);
    assert_eq!(first, replay());
}

#[test]
fn serve_over_streams() {
    let input = recorded_log().join("\n") + "\n";
    let mut output = Vec::new();
    serve(input.as_bytes(), &mut output, options()).unwrap();
    let lines: Vec<&str> = std::str::from_utf8(&output).unwrap().lines().collect();
    let mut server = Server::new(options());
    let direct: Vec<String> = recorded_log().iter().flat_map(|l| server.handle_line(l)).collect();
    assert_eq!(lines, direct.iter().map(String::as_str).collect::<Vec<_>>());
}

#[test]
fn tcp_connections_get_independent_sessions() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || serve_listener(listener, options()));
    let talk = |text: &str| {
        let mut stream = TcpStream::connect(addr).unwrap();
        stream.write_all((line(1, "open", json!({ "text": text })) + "\n").as_bytes()).unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut replies = Vec::new();
        loop {
            let mut l = String::new();
            reader.read_line(&mut l).unwrap();
            let e = parse(l.trim_end());
            let done = e.kind == "diagnostics";
            replies.push(e);
            if done {
                break;
            }
        }
        replies
    };
    let a = talk(COUNTER);
    let b = talk("(+ 1 2)");
    assert_eq!(a.len(), 3);
    assert_eq!(b.len(), 2);
    assert_eq!(a[0].payload["instances"].as_array().unwrap().len(), 1);
    assert_eq!(b[0].payload["instances"].as_array().unwrap().len(), 0);
}
