//! Transcript serialization, one JSON object per line.

use std::io::Write;

use serde::Serialize;

use datashare_core::simnet::{Event, Transcript};

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line<'a> {
    Msg {
        tick: u64,
        delivered: u64,
        from: String,
        to: String,
        label: &'a str,
        digest: String,
    },
    Ckpt {
        tick: u64,
        index: usize,
    },
    Out {
        tick: u64,
        party: usize,
        value: String,
    },
    Clk {
        tick: u64,
        party: usize,
        count: u64,
    },
    Abort {
        tick: u64,
        phase: u32,
        reason: &'a str,
    },
}

fn line(e: &Event) -> Line<'_> {
    match e {
        Event::Msg {
            tick,
            delivered,
            from,
            to,
            label,
            digest,
        } => Line::Msg {
            tick: *tick,
            delivered: *delivered,
            from: from.to_string(),
            to: to.to_string(),
            label,
            digest: format!("{digest:016x}"),
        },
        Event::Checkpoint { tick, index } => Line::Ckpt {
            tick: *tick,
            index: *index,
        },
        Event::Output { tick, party, value } => Line::Out {
            tick: *tick,
            party: *party,
            value: hex::encode(value),
        },
        Event::Clock { tick, party, count } => Line::Clk {
            tick: *tick,
            party: *party,
            count: *count,
        },
        Event::Abort { tick, phase, reason } => Line::Abort {
            tick: *tick,
            phase: *phase,
            reason,
        },
    }
}

pub fn write_jsonl<W: Write + ?Sized>(t: &Transcript, out: &mut W) -> std::io::Result<()> {
    for e in &t.events {
        serde_json::to_writer(&mut *out, &line(e))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(t: &Transcript) -> String {
    let mut buf = Vec::new();
    write_jsonl(t, &mut buf).expect("writing to a Vec");
    String::from_utf8(buf).expect("JSON is UTF-8")
}
