//! Protocols bundled with the library.

use crate::protocol::{parse_protocol, ParseError, ProtocolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
    /// Whether the bundled safety properties actually hold.
    pub safe: bool,
}

impl CorpusEntry {
    pub fn parse(&self) -> Result<ProtocolSpec, ParseError> {
        parse_protocol(self.source)
    }
}

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        name: "mux",
        summary: "mutual exclusion with one shared lock",
        source: include_str!("../corpus/mux.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "mux2d",
        summary: "mutual exclusion with a two-index acknowledgement array",
        source: include_str!("../corpus/mux2d.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "lock_server",
        summary: "clients linking through a server semaphore",
        source: include_str!("../corpus/lock_server.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "decentralized_lock",
        summary: "token lock passed by messages",
        source: include_str!("../corpus/decentralized_lock.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "two_phase_commit",
        summary: "two-phase commit with one transaction manager",
        source: include_str!("../corpus/two_phase_commit.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "toy_quorum",
        summary: "voting protocol whose invariant needs an existential",
        source: include_str!("../corpus/toy_quorum.pv"),
        safe: true,
    },
    CorpusEntry {
        name: "mux_broken",
        summary: "mutual exclusion whose entry rule ignores the lock",
        source: include_str!("../corpus/mux_broken.pv"),
        safe: false,
    },
];

pub fn lookup(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}
