//! Stream ingestion: parse, validate, deduplicate and seal.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::net::TcpStream;
use std::path::PathBuf;

use crate::event::{validate_event, validate_event_intrinsic, EventId, ModalityEvent, VideoMeta, Violation};
use crate::protocol::{parse_event_line, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    Parse(ParseError),
    Invalid(Vec<Violation>),
    DuplicateId(EventId),
}

impl RejectReason {
    pub fn code(&self) -> String {
        match self {
            RejectReason::Parse(e) => e.code().to_owned(),
            RejectReason::Invalid(v) => v.iter().map(|v| v.code()).collect::<Vec<_>>().join(","),
            RejectReason::DuplicateId(_) => "DUPLICATE_ID".to_owned(),
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Parse(e) => write!(f, "{e}"),
            RejectReason::Invalid(_) => f.write_str(&self.code()),
            RejectReason::DuplicateId(id) => write!(f, "DUPLICATE_ID: {id}"),
        }
    }
}

/// One dropped input line. `line` is 1-based within `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub origin: String,
    pub line: usize,
    pub reason: RejectReason,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.origin, self.line, self.reason)
    }
}

/// Events for one video. Once sealed the events are sorted by
/// (start, modality, id) and ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub meta: VideoMeta,
    events: Vec<ModalityEvent>,
    sealed: bool,
}

impl EventStream {
    pub fn new(meta: VideoMeta) -> Self {
        Self { meta, events: Vec::new(), sealed: false }
    }

    /// Builds a sealed stream from already-validated events. Later
    /// duplicates of an id are dropped.
    pub fn from_events(meta: VideoMeta, events: impl IntoIterator<Item = ModalityEvent>) -> Self {
        let mut stream = Self::new(meta);
        let mut seen = HashSet::new();
        stream.events = events.into_iter().filter(|e| seen.insert(e.id.clone())).collect();
        stream.seal();
        stream
    }

    pub fn seal(&mut self) {
        self.events.sort_by(ModalityEvent::stream_order);
        self.sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn events(&self) -> &[ModalityEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<ModalityEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Keeps only events matching `keep`; the result stays sealed.
    pub fn retain(&mut self, keep: impl FnMut(&ModalityEvent) -> bool) {
        self.events.retain(keep);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub stream: EventStream,
    pub rejections: Vec<Rejection>,
}

/// Accumulates lines from one or more sources, then seals.
///
/// With `meta` set, events are validated against the video; without it only
/// the video-independent invariants are checked.
#[derive(Debug)]
pub struct Ingestor {
    meta: Option<VideoMeta>,
    events: Vec<ModalityEvent>,
    seen: HashSet<EventId>,
    rejections: Vec<Rejection>,
}

impl Ingestor {
    pub fn new(meta: Option<VideoMeta>) -> Self {
        Self { meta, events: Vec::new(), seen: HashSet::new(), rejections: Vec::new() }
    }

    /// Blank lines are skipped and not counted as records.
    pub fn feed_line(&mut self, origin: &str, line_no: usize, line: &str) {
        if line.trim().is_empty() {
            return;
        }
        let reason = match parse_event_line(line) {
            Err(e) => RejectReason::Parse(e),
            Ok(event) => {
                let checked = match &self.meta {
                    Some(m) => validate_event(&event, m),
                    None => validate_event_intrinsic(&event),
                };
                match checked {
                    Err(v) => RejectReason::Invalid(v),
                    Ok(()) if !self.seen.insert(event.id.clone()) => RejectReason::DuplicateId(event.id),
                    Ok(()) => {
                        self.events.push(event);
                        return;
                    }
                }
            }
        };
        self.rejections.push(Rejection { origin: origin.to_owned(), line: line_no, reason });
    }

    pub fn feed<I, S>(&mut self, origin: &str, lines: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for (idx, line) in lines.into_iter().enumerate() {
            self.feed_line(origin, idx + 1, line.as_ref());
        }
    }

    /// Reads a whole source. Invalid UTF-8 on a line rejects that line only.
    pub fn feed_reader<R: Read>(&mut self, origin: &str, reader: R) -> io::Result<()> {
        let mut reader = BufReader::new(reader);
        let mut buf = Vec::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            line_no += 1;
            match std::str::from_utf8(&buf) {
                Ok(s) => self.feed_line(origin, line_no, s),
                Err(e) => self.rejections.push(Rejection {
                    origin: origin.to_owned(),
                    line: line_no,
                    reason: RejectReason::Parse(ParseError::Malformed(format!("invalid UTF-8: {e}"))),
                }),
            }
        }
        Ok(())
    }

    pub fn accepted(&self) -> usize {
        self.events.len()
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    /// Seals the accepted events into a stream for `meta`.
    pub fn finish(self, meta: VideoMeta) -> IngestOutcome {
        let mut stream = EventStream { meta, events: self.events, sealed: false };
        stream.seal();
        IngestOutcome { stream, rejections: self.rejections }
    }
}

/// Ingests one source of wire lines for `meta`.
pub fn ingest_stream<I, S>(lines: I, meta: &VideoMeta) -> IngestOutcome
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut ing = Ingestor::new(Some(meta.clone()));
    ing.feed("<input>", lines);
    ing.finish(meta.clone())
}

/// Where wire lines come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputChannel {
    File(PathBuf),
    Stdin,
    #[cfg(unix)]
    UnixSocket(PathBuf),
    Tcp(String),
}

impl InputChannel {
    /// `-` is stdin, `unix:<path>` a Unix socket, `tcp:<host:port>` a TCP
    /// socket; anything else is a file path.
    pub fn parse(spec: &str) -> Self {
        if spec == "-" {
            return InputChannel::Stdin;
        }
        #[cfg(unix)]
        if let Some(path) = spec.strip_prefix("unix:") {
            return InputChannel::UnixSocket(PathBuf::from(path));
        }
        if let Some(addr) = spec.strip_prefix("tcp:") {
            return InputChannel::Tcp(addr.to_owned());
        }
        InputChannel::File(PathBuf::from(spec))
    }

    pub fn label(&self) -> String {
        match self {
            InputChannel::File(p) => p.display().to_string(),
            InputChannel::Stdin => "<stdin>".to_owned(),
            #[cfg(unix)]
            InputChannel::UnixSocket(p) => format!("unix:{}", p.display()),
            InputChannel::Tcp(a) => format!("tcp:{a}"),
        }
    }

    /// Opens the channel for reading until EOF.
    pub fn open(&self) -> io::Result<Box<dyn Read + Send>> {
        Ok(match self {
            InputChannel::File(p) => Box::new(File::open(p)?),
            InputChannel::Stdin => Box::new(io::stdin()),
            #[cfg(unix)]
            InputChannel::UnixSocket(p) => Box::new(std::os::unix::net::UnixStream::connect(p)?),
            InputChannel::Tcp(a) => Box::new(TcpStream::connect(a.as_str())?),
        })
    }
}
