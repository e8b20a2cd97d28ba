//! Shared domain types: ticks, half-open intervals, busy calendars, unit
//! fields and the per-node knowledge-energy matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete simulation time. All windows are half-open `[start, end)`.
pub type Tick = u64;

/// Dense zero-based identifier of a knowledge node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense zero-based index of a unit field within the knowledge space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitFieldId(pub u32);

impl UnitFieldId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for UnitFieldId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("empty interval [{0}, {1}) is not representable")]
    EmptyInterval(Tick, Tick),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("calendar entry [{0}, {1}) overlaps an existing entry")]
    OverlappingEntry(Tick, Tick),
    #[error("energy {value} outside [0, {e_max}]")]
    EnergyOutOfRange { value: f64, e_max: f64 },
}

// ─── Intervals ───────────────────────────────────────────────────────────────

/// Non-empty half-open tick range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    start: Tick,
    end: Tick,
}

impl TimeInterval {
    /// Requires `start < end`; zero-length ranges have no interval value.
    pub fn new(start: Tick, end: Tick) -> Result<Self, ModelError> {
        if start >= end {
            return Err(ModelError::EmptyInterval(start, end));
        }
        Ok(Self { start, end })
    }

    pub fn start(self) -> Tick {
        self.start
    }

    pub fn end(self) -> Tick {
        self.end
    }

    pub fn len(self) -> Tick {
        self.end - self.start
    }

    pub fn contains(self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }

    /// True when the intersection is non-empty. Touching endpoints do not
    /// overlap: `[1,4)` and `[4,6)` are disjoint.
    pub fn overlaps(self, other: TimeInterval) -> bool {
        self.start.max(other.start) < self.end.min(other.end)
    }
}

impl std::fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

// ─── Calendars ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    Task,
    KnowledgeProcessing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalendarEntry {
    pub interval: TimeInterval,
    pub kind: EntryKind,
}

/// Busy time of one node. Entries are kept sorted by start and strictly
/// non-overlapping, so lookups and gap scans never depend on insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Calendar {
    entries: Vec<CalendarEntry>,
}

impl Calendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: CalendarEntry) -> Result<(), ModelError> {
        let pos = self
            .entries
            .partition_point(|e| e.interval.start() < entry.interval.start());
        let clashes = |other: &CalendarEntry| other.interval.overlaps(entry.interval);
        if pos > 0 && clashes(&self.entries[pos - 1]) {
            return Err(ModelError::OverlappingEntry(
                entry.interval.start(),
                entry.interval.end(),
            ));
        }
        if pos < self.entries.len() && clashes(&self.entries[pos]) {
            return Err(ModelError::OverlappingEntry(
                entry.interval.start(),
                entry.interval.end(),
            ));
        }
        self.entries.insert(pos, entry);
        Ok(())
    }

    pub fn entries(&self) -> &[CalendarEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Maximal free intervals of `window` not intersecting any entry of any given
/// calendar. The result is sorted, pairwise disjoint, and together with the
/// busy time partitions the window.
pub fn free_gaps(calendars: &[&Calendar], window: TimeInterval) -> Vec<TimeInterval> {
    let mut busy: Vec<TimeInterval> = Vec::new();
    for cal in calendars {
        for entry in cal.entries() {
            let start = entry.interval.start().max(window.start());
            let end = entry.interval.end().min(window.end());
            if start < end {
                // Clipped to the window; unclipped entries outside are irrelevant.
                busy.push(TimeInterval::new(start, end).expect("clipped non-empty"));
            }
        }
    }
    busy.sort();

    let mut gaps = Vec::new();
    let mut cursor = window.start();
    for iv in busy {
        if iv.start() > cursor {
            gaps.push(TimeInterval::new(cursor, iv.start()).expect("gap non-empty"));
        }
        cursor = cursor.max(iv.end());
    }
    if cursor < window.end() {
        gaps.push(TimeInterval::new(cursor, window.end()).expect("gap non-empty"));
    }
    gaps
}

// ─── Knowledge space ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitField {
    pub id: UnitFieldId,
    pub label: Option<String>,
}

/// Flat list of unit fields with dense ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeSpace {
    fields: Vec<UnitField>,
}

impl KnowledgeSpace {
    pub fn new(count: u32) -> Self {
        let fields = (0..count)
            .map(|i| UnitField { id: UnitFieldId(i), label: None })
            .collect();
        Self { fields }
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        let fields = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| UnitField { id: UnitFieldId(i as u32), label: Some(label) })
            .collect();
        Self { fields }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn contains(&self, id: UnitFieldId) -> bool {
        id.index() < self.fields.len()
    }

    pub fn field(&self, id: UnitFieldId) -> Option<&UnitField> {
        self.fields.get(id.index())
    }
}

// ─── Energy matrix ───────────────────────────────────────────────────────────

/// Knowledge energy per (node, unit field), each value within `[0, e_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix {
    node_count: u32,
    field_count: u32,
    e_max: f64,
    values: Vec<f64>,
}

impl EnergyMatrix {
    pub fn new(node_count: u32, field_count: u32, e_max: f64) -> Self {
        assert!(e_max > 0.0, "e_max must be positive");
        let len = node_count as usize * field_count as usize;
        Self { node_count, field_count, e_max, values: vec![0.0; len] }
    }

    fn offset(&self, node: NodeId, field: UnitFieldId) -> Result<usize, ModelError> {
        if node.0 >= self.node_count || field.0 >= self.field_count {
            return Err(ModelError::IndexOutOfRange(format!(
                "node {} field {} in {}x{} matrix",
                node, field, self.node_count, self.field_count
            )));
        }
        Ok(node.index() * self.field_count as usize + field.index())
    }

    pub fn energy(&self, node: NodeId, field: UnitFieldId) -> Result<f64, ModelError> {
        Ok(self.values[self.offset(node, field)?])
    }

    pub fn set(&mut self, node: NodeId, field: UnitFieldId, value: f64) -> Result<(), ModelError> {
        if !(0.0..=self.e_max).contains(&value) {
            return Err(ModelError::EnergyOutOfRange { value, e_max: self.e_max });
        }
        let at = self.offset(node, field)?;
        self.values[at] = value;
        Ok(())
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn field_count(&self) -> u32 {
        self.field_count
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// Mean energy of one node across all unit fields.
    pub fn node_mean(&self, node: NodeId) -> Result<f64, ModelError> {
        if node.0 >= self.node_count {
            return Err(ModelError::IndexOutOfRange(format!("node {node}")));
        }
        if self.field_count == 0 {
            return Ok(0.0);
        }
        let base = node.index() * self.field_count as usize;
        let sum: f64 = self.values[base..base + self.field_count as usize].iter().sum();
        Ok(sum / self.field_count as f64)
    }
}
