//! AIS position reports: CSV loading, projection onto the segment, binning
//! into per-cell counts, and a synthetic count generator.
//!
//! Input follows the marinecadastre daily-file layout. Required columns are
//! `LAT`, `LON` and `BaseDateTime` (matched case-insensitively); `MMSI` and
//! `VesselType` are used when present.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDateTime;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::lgcp_fit::EventCounts;
use crate::par;

/// Meters per degree of latitude.
pub const METERS_PER_DEG_LAT: f64 = 111_320.0;
const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// UTC.
    pub timestamp: NaiveDateTime,
    pub lat: f64,
    pub lon: f64,
    pub vessel_id: Option<String>,
    pub vessel_type: Option<String>,
}

/// Segment geometry and the collection window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_center: f64,
    pub corridor_halfwidth: f64,
    #[serde(with = "timefmt")]
    pub start: NaiveDateTime,
    #[serde(with = "timefmt")]
    pub end: NaiveDateTime,
}

mod timefmt {
    use super::TIME_FORMAT;
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format(TIME_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let s = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&s, TIME_FORMAT).map_err(serde::de::Error::custom)
    }
}

impl SegmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max) {
            return Err(Error::InvalidParameter("segment needs lat_min < lat_max".into()));
        }
        if !(self.corridor_halfwidth > 0.0) {
            return Err(Error::InvalidParameter("corridor half-width must be > 0".into()));
        }
        if self.start >= self.end {
            return Err(Error::InvalidParameter("time window needs start < end".into()));
        }
        Ok(())
    }

    /// Segment length in meters.
    pub fn length_m(&self) -> f64 {
        (self.lat_max - self.lat_min) * METERS_PER_DEG_LAT
    }

    /// Window length in days.
    pub fn span_days(&self) -> f64 {
        (self.end - self.start).num_milliseconds() as f64 / 86_400_000.0
    }

    /// A grid of `spacing`-wide cells covering the segment.
    pub fn grid(&self, spacing: f64) -> Result<Grid1D> {
        let n = (self.length_m() / spacing).ceil().max(1.0) as usize;
        Grid1D::new(0.0, spacing, n)
    }

    fn accepts(&self, r: &EventRecord) -> bool {
        r.lat >= self.lat_min
            && r.lat <= self.lat_max
            && (r.lon - self.lon_center).abs() <= self.corridor_halfwidth
            && r.timestamp >= self.start
            && r.timestamp < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedEvents {
    pub events: Vec<EventRecord>,
    /// Malformed rows.
    pub skipped: usize,
    /// Well-formed rows outside the segment or window.
    pub filtered: usize,
}

pub fn load_events(path: impl AsRef<Path>, spec: &SegmentSpec) -> Result<LoadedEvents> {
    let file = std::fs::File::open(path)?;
    read_events(file, spec)
}

struct Columns {
    lat: usize,
    lon: usize,
    time: usize,
    mmsi: Option<usize>,
    vessel_type: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        Ok(Self {
            lat: need("LAT")?,
            lon: need("LON")?,
            time: need("BaseDateTime")?,
            mmsi: find("MMSI"),
            vessel_type: find("VesselType"),
        })
    }

    fn parse(&self, row: &csv::StringRecord) -> Option<EventRecord> {
        let lat: f64 = row.get(self.lat)?.trim().parse().ok()?;
        let lon: f64 = row.get(self.lon)?.trim().parse().ok()?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return None;
        }
        let timestamp = NaiveDateTime::parse_from_str(row.get(self.time)?.trim(), TIME_FORMAT).ok()?;
        let opt =
            |i: Option<usize>| i.and_then(|i| row.get(i)).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string);
        Some(EventRecord { timestamp, lat, lon, vessel_id: opt(self.mmsi), vessel_type: opt(self.vessel_type) })
    }
}

pub fn read_events<R: Read>(reader: R, spec: &SegmentSpec) -> Result<LoadedEvents> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let cols = Columns::from_header(rdr.headers()?)?;
    let mut out = LoadedEvents { events: Vec::new(), skipped: 0, filtered: 0 };
    for row in rdr.records() {
        let Some(rec) = row.ok().and_then(|r| cols.parse(&r)) else {
            out.skipped += 1;
            continue;
        };
        if spec.accepts(&rec) {
            out.events.push(rec);
        } else {
            out.filtered += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DedupePolicy {
    /// Every report counts.
    #[serde(rename = "none")]
    None,
    /// A vessel counts at most once per cell over the window. Reports with
    /// no vessel id always count.
    #[default]
    #[serde(rename = "per-vessel-per-cell")]
    PerVesselPerCell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedEvents {
    pub counts: EventCounts,
    /// Events whose position fell outside the grid.
    pub out_of_range: usize,
}

/// Projects latitude to meters along the segment and counts per cell.
pub fn bin_events(
    events: &[EventRecord],
    spec: &SegmentSpec,
    grid: &Grid1D,
    dedupe: DedupePolicy,
) -> Result<BinnedEvents> {
    spec.validate()?;
    let mut counts = vec![0u64; grid.n_cells()];
    let mut seen: HashSet<(&str, usize)> = HashSet::new();
    let mut out_of_range = 0;
    for e in events {
        let s = (e.lat - spec.lat_min) * METERS_PER_DEG_LAT;
        let Some(cell) = grid.locate(s) else {
            out_of_range += 1;
            continue;
        };
        if let (DedupePolicy::PerVesselPerCell, Some(id)) = (dedupe, e.vessel_id.as_deref()) {
            if !seen.insert((id, cell)) {
                continue;
            }
        }
        counts[cell] += 1;
    }
    Ok(BinnedEvents { counts: EventCounts::new(*grid, counts, spec.span_days())?, out_of_range })
}

/// Counts file written by `fit` inputs and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    pub grid: Grid1D,
    pub counts: Vec<u64>,
    pub collection_span: f64,
    pub window: Option<Window>,
    pub dedupe: Option<DedupePolicy>,
    pub skipped: usize,
    #[serde(default)]
    pub filtered: usize,
    #[serde(default)]
    pub out_of_range: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    #[serde(with = "timefmt")]
    pub start: NaiveDateTime,
    #[serde(with = "timefmt")]
    pub end: NaiveDateTime,
}

impl CountsFile {
    pub fn from_counts(counts: &EventCounts) -> Self {
        Self {
            grid: counts.grid,
            counts: counts.counts.clone(),
            collection_span: counts.collection_span,
            window: None,
            dedupe: None,
            skipped: 0,
            filtered: 0,
            out_of_range: 0,
        }
    }

    pub fn event_counts(&self) -> Result<EventCounts> {
        EventCounts::new(self.grid, self.counts.clone(), self.collection_span)
    }
}

/// Loads, filters and bins a CSV into a counts file.
pub fn counts_from_csv(
    path: impl AsRef<Path>,
    spec: &SegmentSpec,
    grid: &Grid1D,
    dedupe: DedupePolicy,
) -> Result<CountsFile> {
    let loaded = load_events(path, spec)?;
    let binned = bin_events(&loaded.events, spec, grid, dedupe)?;
    Ok(CountsFile {
        grid: *grid,
        counts: binned.counts.counts,
        collection_span: binned.counts.collection_span,
        window: Some(Window { start: spec.start, end: spec.end }),
        dedupe: Some(dedupe),
        skipped: loaded.skipped,
        filtered: loaded.filtered,
        out_of_range: binned.out_of_range,
    })
}

/// Independent `Poisson(exp(f_i)·Δs)` counts, cell `i` drawn from stream `i`.
pub fn synth_generate(true_log_field: &[f64], grid: &Grid1D, seed: u64, collection_span: f64) -> Result<EventCounts> {
    grid.check_len(true_log_field.len())?;
    let mut counts = Vec::with_capacity(grid.n_cells());
    for (i, f) in true_log_field.iter().enumerate() {
        if !f.is_finite() {
            return Err(Error::InvalidParameter(format!("true log field at cell {i} is not finite")));
        }
        let rate = f.exp() * grid.spacing();
        if !rate.is_finite() {
            return Err(Error::Overflow { cell: i });
        }
        let c = if rate < 1e-300 {
            0
        } else {
            let dist = Poisson::new(rate).map_err(|e| Error::InvalidParameter(format!("cell {i}: {e}")))?;
            dist.sample(&mut par::stream_rng(seed, i as u64)) as u64
        };
        counts.push(c);
    }
    EventCounts::new(*grid, counts, collection_span)
}
