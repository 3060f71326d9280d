//! Asynchronous event streams and their LNES surface encoding.

mod codec;
mod lnes;

pub use codec::{parse_events, write_events, EventFormat, BINARY_HEADER_LEN, BINARY_MAGIC, BINARY_RECORD_LEN, CSV_HEADER};
pub use lnes::{encode_lnes, encode_lnes_with, read_lnes, write_lnes, LnesMode, LnesSurface, LNES_MAGIC};

use thiserror::Error;

/// Default window length: one frame at roughly 30 Hz.
pub const DEFAULT_DELTA_T_US: u64 = 33_000;
/// Largest accepted window length.
pub const MAX_DELTA_T_US: u64 = 1 << 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated record {index}")]
    TruncatedRecord { index: usize },
    #[error("malformed record {index}: {reason}")]
    MalformedRecord { index: usize, reason: String },
    #[error("event {index} at ({x}, {y}) is outside the {width}x{height} sensor")]
    OutOfBoundsPixel {
        index: usize,
        x: u32,
        y: u32,
        width: u16,
        height: u16,
    },
    #[error("event {index} has timestamp earlier than its predecessor")]
    NonMonotonicTimestamp { index: usize },
    #[error("event {index} has polarity {value}, expected -1 or +1")]
    InvalidPolarity { index: usize, value: i64 },
    #[error("surface {expected_w}x{expected_h} requested for a {width}x{height} sensor")]
    DimensionMismatch {
        width: u16,
        height: u16,
        expected_w: usize,
        expected_h: usize,
    },
    #[error("window length must be in (0, 2^32] us, got {0}")]
    InvalidWindow(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Polarity {
    Negative = -1,
    Positive = 1,
}

impl Polarity {
    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            -1 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        self as i8
    }

    /// LNES channel: 0 for negative, 1 for positive.
    pub fn channel(self) -> usize {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds since the stream epoch.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

/// Events from one sensor, sorted by timestamp and inside the sensor bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, events: Vec<Event>) -> Result<Self, EventError> {
        let mut prev = 0u64;
        for (index, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(EventError::OutOfBoundsPixel {
                    index,
                    x: e.x.into(),
                    y: e.y.into(),
                    width,
                    height,
                });
            }
            if index > 0 && e.t < prev {
                return Err(EventError::NonMonotonicTimestamp { index });
            }
            prev = e.t;
        }
        Ok(Self {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Events with `t_end - delta_t < t <= t_end`, located by binary search.
    pub fn window(&self, t_end: u64, delta_t: u64) -> Result<EventWindow<'_>, EventError> {
        if delta_t == 0 || delta_t > MAX_DELTA_T_US {
            return Err(EventError::InvalidWindow(delta_t));
        }
        let hi = self.events.partition_point(|e| e.t <= t_end);
        let lo = match t_end.checked_sub(delta_t) {
            Some(start) => self.events[..hi].partition_point(|e| e.t <= start),
            None => 0,
        };
        Ok(EventWindow {
            t_end,
            delta_t,
            width: self.width,
            height: self.height,
            events: &self.events[lo..hi],
        })
    }
}

/// Slice of a stream in the half-open interval `(t_end - delta_t, t_end]`.
#[derive(Debug, Clone, Copy)]
pub struct EventWindow<'a> {
    pub t_end: u64,
    pub delta_t: u64,
    pub width: u16,
    pub height: u16,
    pub events: &'a [Event],
}

/// Free-function form of [`EventStream::window`].
pub fn window_slice(stream: &EventStream, t_end: u64, delta_t: u64) -> Result<EventWindow<'_>, EventError> {
    stream.window(t_end, delta_t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64) -> Event {
        Event {
            t,
            x: 0,
            y: 0,
            polarity: Polarity::Positive,
        }
    }

    fn times(w: &EventWindow<'_>) -> Vec<u64> {
        w.events.iter().map(|e| e.t).collect()
    }

    #[test]
    fn window_membership() {
        let s = EventStream::new(4, 4, vec![ev(10), ev(20), ev(30)]).unwrap();
        assert_eq!(times(&s.window(30, 15).unwrap()), vec![20, 30]);
        assert!(s.window(5, 15).unwrap().events.is_empty());
        assert_eq!(times(&s.window(30, 1_000).unwrap()), vec![10, 20, 30]);
        // left edge is open
        assert_eq!(times(&s.window(30, 10).unwrap()), vec![30]);
        assert_eq!(s.window(30, 0).unwrap_err(), EventError::InvalidWindow(0));
    }

    #[test]
    fn stream_invariants() {
        let err = EventStream::new(4, 4, vec![ev(200), ev(150)]).unwrap_err();
        assert_eq!(err, EventError::NonMonotonicTimestamp { index: 1 });
        let oob = Event { x: 4, ..ev(1) };
        assert!(matches!(
            EventStream::new(4, 4, vec![oob]),
            Err(EventError::OutOfBoundsPixel { index: 0, .. })
        ));
    }
}
