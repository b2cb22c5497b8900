mod common;

use std::time::{Duration, Instant};

use common::ENTRIES;
use visr_core::session::{Session, SessionError, Severity};
use visr_core::view::{default_view, Tag};

/// Dispatching every handler of every instance, applying the edit and
/// rescanning shows exactly the view the dispatch returned.
#[test]
fn mvc_reconciliation_over_corpus_handlers() {
    for entry in ENTRIES {
        let sample = common::entry_file(entry, "sample.mls");
        let base = common::open(&sample);
        let mut edits = 0;
        for id in base.instance_ids() {
            for (event, handler) in common::handlers(base.view(id).unwrap()) {
                let mut session = common::open(&sample);
                let outcome = session.dispatch_event(id, &handler, &common::payload_for(&event)).unwrap();
                match outcome.edit {
                    Some(edit) => {
                        edits += 1;
                        session.apply_edit(&edit).unwrap();
                        assert_eq!(session.view(id), Some(&outcome.tree), "{entry} {id} {handler}");
                    }
                    None => assert_eq!(session.view(id), Some(&outcome.tree)),
                }
            }
        }
        assert!(edits > 0, "{entry}: no handler changed any state");
    }
}

const MIXED: &str = r#"(def n ^:visr (demo.counter/Counter "{:count 1}"))
(def spin ^:visr (adversarial.core/Spin "{:n 1}"))
(def deep ^:visr (adversarial.core/Deep "{:n 2}"))
(def huge ^:visr (adversarial.core/Huge "{:n 3}"))
(def wide ^:visr (adversarial.core/Wide "{:n 4}"))
(def tower ^:visr (adversarial.core/Tower "{:n 5}"))
(def trap ^:visr (adversarial.core/Trap "{:n 6}"))
"#;

fn id_of(session: &Session, ext: &str) -> u64 {
    session.instances().into_iter().find(|i| i.extension_ref.ends_with(ext)).unwrap().instance_id
}

#[test]
fn adversarial_renders_fall_back_to_the_default_view() {
    let session = common::open(MIXED);
    for ext in ["Spin", "Deep", "Huge", "Wide", "Tower"] {
        let id = id_of(&session, ext);
        let syntax = session.instance_syntax(id).unwrap();
        assert_eq!(session.view(id).unwrap(), &default_view(&syntax.extension_ref, &syntax.state_text), "{ext}");
        let diags: Vec<_> = session.diagnostics().into_iter().filter(|d| d.span == syntax.span).collect();
        assert_eq!(diags.len(), 1, "{ext}");
        assert_eq!(diags[0].severity, Severity::Error);
    }
    let counter = session.view(id_of(&session, "Counter")).unwrap();
    assert_eq!(counter.tag, Tag::Row);
}

#[test]
fn session_keeps_working_after_adversarial_code() {
    let mut session = common::open(MIXED);
    let trap = id_of(&session, "Trap");
    let before = session.buffer().clone();
    let handler = common::handlers(session.view(trap).unwrap())[0].1.clone();
    let outcome = session.dispatch_event(trap, &handler, &Default::default()).unwrap();
    assert!(outcome.edit.is_none());
    assert_eq!(outcome.diagnostics[0].severity, Severity::Error);
    assert_eq!(session.buffer(), &before);

    let counter = id_of(&session, "Counter");
    let inc = common::handlers(session.view(counter).unwrap())[0].1.clone();
    let edit = session.dispatch_event(counter, &inc, &Default::default()).unwrap().edit.unwrap();
    assert_eq!(edit.replacement, "\"{:count 2}\"");
    session.apply_edit(&edit).unwrap();
    assert!(session.buffer().text.contains("{:count 2}"));
}

#[test]
fn adversarial_renders_leave_other_instances_alone() {
    let mut session = common::open(MIXED);
    let snapshot = |s: &Session| (s.buffer().clone(), s.instances(), s.instance_ids().iter().map(|&i| (s.view(i).cloned(), s.state(i))).collect::<Vec<_>>());
    let before = snapshot(&session);
    for ext in ["Spin", "Deep", "Huge", "Wide", "Tower"] {
        let id = id_of(&session, ext);
        session.render_instance(id).unwrap();
    }
    assert_eq!(snapshot(&session), before);
}

#[test]
fn hundred_adversarial_renders_are_fast() {
    let mut session = common::open(MIXED);
    let ids: Vec<u64> = ["Spin", "Deep", "Huge", "Wide", "Tower"].iter().map(|e| id_of(&session, e)).collect();
    let started = Instant::now();
    for k in 0..100 {
        session.render_instance(ids[k % ids.len()]).unwrap();
    }
    assert!(started.elapsed() < Duration::from_secs(10), "{:?}", started.elapsed());
}

#[test]
fn stale_and_unknown_handlers_are_errors() {
    let mut session = common::open(MIXED);
    let counter = id_of(&session, "Counter");
    assert!(matches!(session.dispatch_event(counter, "h99", &Default::default()), Err(SessionError::StaleHandler { .. })));
    assert!(matches!(session.dispatch_event(999, "h0", &Default::default()), Err(SessionError::UnknownInstance(999))));
}

#[test]
fn copied_instance_text_is_live_in_another_buffer() {
    let source = common::open(&common::entry_file("counter", "sample.mls"));
    let info = &source.instances()[0];
    let copied: String = source.buffer().text.chars().skip(info.span.start).take(info.span.end - info.span.start).collect();
    let mut target = common::open("(def total 0)\n");
    let len = target.buffer().text.chars().count();
    let edit = visr_core::session::TextEdit {
        span: visr_core::reader::Span::new(len, len),
        replacement: format!("(println {copied})\n"),
        base_version: 0,
    };
    let rendered = target.apply_edit(&edit).unwrap();
    assert_eq!(rendered.len(), 1);
    let pasted = &target.instances()[0];
    assert_eq!((pasted.extension_ref.as_str(), pasted.state_text.as_str()), (info.extension_ref.as_str(), info.state_text.as_str()));
    assert!(!common::handlers(target.view(pasted.instance_id).unwrap()).is_empty());
    assert_eq!(common::run(&target.buffer().text).output, "3\n");
}

#[test]
fn unparsable_state_is_pending_not_fatal() {
    let session = common::open("^:visr (demo.counter/Counter \"{:count \")");
    let d = session.diagnostics();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].severity, Severity::Info);
    assert!(d[0].message.starts_with("pending"));
}
