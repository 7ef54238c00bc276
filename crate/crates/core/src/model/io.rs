//! CSV ingestion and export.
//!
//! ```text
//! trajectories.csv  user_id,lat,lon,t_start,t_end
//! billboards.csv    billboard_id,lat,lon,cost,panel_size   (panel_size optional, default 1)
//! affinities.csv    user_id,tag_id,probability
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::StringRecord;

use super::{BillboardRecord, LatLon, TagAffinity, TrajectoryRecord};
use crate::error::{Error, Result};

/// The three input tables, as loaded from a directory.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub trajectories: Vec<TrajectoryRecord>,
    pub billboards: Vec<BillboardRecord>,
    pub affinities: Vec<TagAffinity>,
}

impl Dataset {
    pub const TRAJECTORIES: &'static str = "trajectories.csv";
    pub const BILLBOARDS: &'static str = "billboards.csv";
    pub const AFFINITIES: &'static str = "affinities.csv";

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Ok(Dataset {
            trajectories: load_trajectories(&dir.join(Self::TRAJECTORIES))?,
            billboards: load_billboards(&dir.join(Self::BILLBOARDS))?,
            affinities: load_affinities(&dir.join(Self::AFFINITIES))?,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<(PathBuf, File)> {
            let p = dir.join(name);
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            Ok((p, f))
        };
        let (_, f) = create(Self::TRAJECTORIES)?;
        write_trajectories(f, &self.trajectories)?;
        let (_, f) = create(Self::BILLBOARDS)?;
        write_billboards(f, &self.billboards)?;
        let (_, f) = create(Self::AFFINITIES)?;
        write_affinities(f, &self.affinities)?;
        Ok(())
    }
}

struct Table<'a> {
    file: &'a str,
    columns: Vec<Option<usize>>,
    names: &'a [&'a str],
}

impl<'a> Table<'a> {
    fn new(
        file: &'a str,
        headers: &StringRecord,
        names: &'a [&'a str],
        optional: &[&str],
    ) -> Result<Self> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let idx = headers.iter().position(|h| h.trim() == *name);
            if idx.is_none() && !optional.contains(name) {
                return Err(Error::Row {
                    file: file.to_owned(),
                    row: 0,
                    column: (*name).to_owned(),
                    message: "missing column in header".into(),
                });
            }
            columns.push(idx);
        }
        Ok(Table {
            file,
            columns,
            names,
        })
    }

    fn err(&self, row: usize, col: usize, message: impl Into<String>) -> Error {
        Error::Row {
            file: self.file.to_owned(),
            row,
            column: self.names[col].to_owned(),
            message: message.into(),
        }
    }

    fn raw<'r>(&self, rec: &'r StringRecord, row: usize, col: usize) -> Result<Option<&'r str>> {
        match self.columns[col] {
            None => Ok(None),
            Some(i) => rec
                .get(i)
                .map(|s| Some(s.trim()))
                .ok_or_else(|| self.err(row, col, "missing field")),
        }
    }

    fn text(&self, rec: &StringRecord, row: usize, col: usize) -> Result<String> {
        match self.raw(rec, row, col)? {
            Some(s) if !s.is_empty() => Ok(s.to_owned()),
            _ => Err(self.err(row, col, "empty identifier")),
        }
    }

    fn parse<T: FromStr>(&self, rec: &StringRecord, row: usize, col: usize) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(rec, row, col)? {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.err(row, col, format!("cannot parse `{s}`: {e}"))),
        }
    }

    fn required<T: FromStr>(&self, rec: &StringRecord, row: usize, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(rec, row, col)?
            .ok_or_else(|| self.err(row, col, "missing field"))
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(r)
}

/// Reads rows until EOF; an input without even a header line is an empty
/// table.
fn rows<R: Read>(
    file: &str,
    rdr: &mut csv::Reader<R>,
    names: &[&str],
    optional: &[&str],
    mut each: impl FnMut(&Table<'_>, &StringRecord, usize) -> Result<()>,
) -> Result<()> {
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(());
    }
    let table = Table::new(file, &headers, names, optional)?;
    let mut rec = StringRecord::new();
    let mut row = 0;
    while rdr.read_record(&mut rec)? {
        row += 1;
        each(&table, &rec, row)?;
    }
    Ok(())
}

const TRAJ_COLS: [&str; 5] = ["user_id", "lat", "lon", "t_start", "t_end"];
const BB_COLS: [&str; 5] = ["billboard_id", "lat", "lon", "cost", "panel_size"];
const AFF_COLS: [&str; 3] = ["user_id", "tag_id", "probability"];

fn location(t: &Table<'_>, rec: &StringRecord, row: usize) -> Result<LatLon> {
    let lat: f64 = t.required(rec, row, 1)?;
    let lon: f64 = t.required(rec, row, 2)?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(t.err(row, 1, format!("latitude {lat} outside [-90, 90]")));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(t.err(row, 2, format!("longitude {lon} outside [-180, 180]")));
    }
    Ok(LatLon::new(lat, lon))
}

pub fn read_trajectories<R: Read>(name: &str, r: R) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    rows(name, &mut reader(r), &TRAJ_COLS, &[], |t, rec, row| {
        let user_id = t.text(rec, row, 0)?.into();
        let location = location(t, rec, row)?;
        let t_start: i64 = t.required(rec, row, 3)?;
        let t_end: i64 = t.required(rec, row, 4)?;
        if t_start > t_end {
            return Err(t.err(row, 4, format!("t_end {t_end} precedes t_start {t_start}")));
        }
        out.push(TrajectoryRecord {
            user_id,
            location,
            t_start,
            t_end,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_billboards<R: Read>(name: &str, r: R) -> Result<Vec<BillboardRecord>> {
    let mut out = Vec::new();
    rows(
        name,
        &mut reader(r),
        &BB_COLS,
        &["panel_size"],
        |t, rec, row| {
            let billboard_id = t.text(rec, row, 0)?.into();
            let location = location(t, rec, row)?;
            let cost: f64 = t.required(rec, row, 3)?;
            if !(cost >= 0.0 && cost.is_finite()) {
                return Err(t.err(row, 3, format!("cost {cost} must be non-negative")));
            }
            let panel_size: f64 = t.parse(rec, row, 4)?.unwrap_or(1.0);
            if !(panel_size > 0.0 && panel_size.is_finite()) {
                return Err(t.err(row, 4, format!("panel size {panel_size} must be positive")));
            }
            out.push(BillboardRecord {
                billboard_id,
                location,
                cost,
                panel_size,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

pub fn read_affinities<R: Read>(name: &str, r: R) -> Result<Vec<TagAffinity>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    rows(name, &mut reader(r), &AFF_COLS, &[], |t, rec, row| {
        let user_id: String = t.text(rec, row, 0)?;
        let tag_id: String = t.text(rec, row, 1)?;
        let probability: f64 = t.required(rec, row, 2)?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(t.err(row, 2, format!("probability {probability} outside [0, 1]")));
        }
        if !seen.insert((user_id.clone(), tag_id.clone())) {
            return Err(t.err(row, 1, format!("duplicate pair ({user_id}, {tag_id})")));
        }
        out.push(TagAffinity {
            user_id: user_id.into(),
            tag_id: tag_id.into(),
            probability,
        });
        Ok(())
    })?;
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn load_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    read_trajectories(&display(path), open(path)?)
}

pub fn load_billboards(path: &Path) -> Result<Vec<BillboardRecord>> {
    read_billboards(&display(path), open(path)?)
}

pub fn load_affinities(path: &Path) -> Result<Vec<TagAffinity>> {
    read_affinities(&display(path), open(path)?)
}

pub fn write_trajectories<W: Write>(w: W, records: &[TrajectoryRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRAJ_COLS)?;
    for r in records {
        wtr.write_record([
            r.user_id.as_str(),
            &r.location.lat.to_string(),
            &r.location.lon.to_string(),
            &r.t_start.to_string(),
            &r.t_end.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_billboards<W: Write>(w: W, records: &[BillboardRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(BB_COLS)?;
    for r in records {
        wtr.write_record([
            r.billboard_id.as_str(),
            &r.location.lat.to_string(),
            &r.location.lon.to_string(),
            &r.cost.to_string(),
            &r.panel_size.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_affinities<W: Write>(w: W, records: &[TagAffinity]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(AFF_COLS)?;
    for r in records {
        wtr.write_record([
            r.user_id.as_str(),
            r.tag_id.as_str(),
            &r.probability.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
