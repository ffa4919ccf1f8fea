//! CSV readers and writers for series, edge lists and populations.
//!
//! Every reader treats a cell holding exactly zero as a missing observation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

use super::table::{IsoWeek, TimeSeriesTable, Timestamps};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::parse(path, line, format!("ragged row: expected {expected_len} fields, found {len}"))
        }
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Reads `timestamp,v0,...` or `week,region_0,...`. Timestamps are integer
/// epoch seconds or ISO week labels (`2015-W07`), detected from the first row.
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeriesTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let first = headers.get(0).unwrap_or_default();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| csv_err(path, e))?;
    let weekly = match first {
        "timestamp" => records.first().is_some_and(|r| r[0].contains("-W")),
        "week" => true,
        other => {
            return Err(Error::parse(
                path,
                1,
                format!("first column must be `timestamp` or `week`, found `{other}`"),
            ))
        }
    };
    let n = headers.len() - 1;
    if n == 0 {
        return Err(Error::parse(path, 1, "no vertex columns"));
    }
    let mut epochs = Vec::new();
    let mut weeks = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let stamp = &rec[0];
        if weekly {
            weeks.push(stamp.parse::<IsoWeek>().map_err(|e| Error::parse(path, line, e.to_string()))?);
        } else {
            epochs.push(
                stamp
                    .parse::<i64>()
                    .map_err(|_| Error::parse(path, line, format!("bad timestamp `{stamp}`")))?,
            );
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                if cell.is_empty() {
                    return Ok(0.0);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::parse(path, line, format!("bad value `{cell}`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(row);
    }
    let stamps = if weekly {
        Timestamps::IsoWeek(weeks)
    } else {
        Timestamps::Epoch(epochs)
    };
    TimeSeriesTable::with_zero_missing(stamps, values).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// Writes a series in the format read by [`load_series`]; unobserved cells are
/// written as 0.
pub fn write_series(path: impl AsRef<Path>, table: &TimeSeriesTable) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let weekly = matches!(table.timestamps(), Timestamps::IsoWeek(_));
    out.push_str(if weekly { "week" } else { "timestamp" });
    for i in 0..table.n() {
        if weekly {
            out.push_str(&format!(",region_{i}"));
        } else {
            out.push_str(&format!(",v{i}"));
        }
    }
    out.push('\n');
    for t in 0..table.len() {
        out.push_str(&table.timestamps().label(t));
        for (v, &ok) in table.row(t).iter().zip(table.row_mask(t)) {
            out.push(',');
            out.push_str(&if ok { v.to_string() } else { "0".into() });
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a `src,dst` edge list over vertices `0..n`.
///
/// When `n` is `None` the vertex count is one past the largest id.
pub fn load_edges(path: impl AsRef<Path>, n: Option<usize>) -> Result<DirectedGraph> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src", "dst"] {
        return Err(Error::parse(path, 1, "edge header must be `src,dst`"));
    }
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = |k: usize| {
            rec[k]
                .parse::<usize>()
                .map_err(|_| Error::parse(path, line, format!("bad vertex id `{}`", &rec[k])))
        };
        edges.push((id(0)?, id(1)?));
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1));
    DirectedGraph::new(n, edges).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn write_edges(path: impl AsRef<Path>, g: &DirectedGraph) -> Result<()> {
    let mut out = String::from("src,dst\n");
    for &(a, b) in g.edges() {
        out.push_str(&format!("{a},{b}\n"));
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Reads `region,N` rows. Regions are `region_<i>` labels or bare indices and
/// must cover `0..n` exactly once.
pub fn load_populations(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["region", "N"] {
        return Err(Error::parse(path, 1, "population header must be `region,N`"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let label = &rec[0];
        let idx = label
            .strip_prefix("region_")
            .unwrap_or(label)
            .parse::<usize>()
            .map_err(|_| Error::parse(path, line, format!("bad region `{label}`")))?;
        let pop = rec[1]
            .parse::<f64>()
            .ok()
            .filter(|p| *p > 0.0 && p.is_finite())
            .ok_or_else(|| Error::parse(path, line, format!("bad population `{}`", &rec[1])))?;
        rows.push((idx, pop, line));
    }
    let mut out = vec![f64::NAN; rows.len()];
    for (idx, pop, line) in rows {
        if idx >= out.len() || !out[idx].is_nan() {
            return Err(Error::parse(path, line, format!("region {idx} out of range or repeated")));
        }
        out[idx] = pop;
    }
    Ok(out)
}

pub fn write_populations(path: impl AsRef<Path>, population: &[f64]) -> Result<()> {
    let mut out = String::from("region,N\n");
    for (i, p) in population.iter().enumerate() {
        out.push_str(&format!("region_{i},{p}\n"));
    }
    write_file(path.as_ref(), out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn zero_cells_are_missing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "s.csv", "timestamp,v0,v1\n0,1.5,0\n300,2,3\n");
        let t = load_series(&p).unwrap();
        assert_eq!(t.mask(), &[vec![true, false], vec![true, true]]);
        let p = write(&dir, "f.csv", "timestamp,v0\n0,1\n300,2\n");
        assert!(load_series(&p).unwrap().mask().iter().flatten().all(|&m| m));
    }

    #[test]
    fn wide_five_minute_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("timestamp");
        for i in 0..207 {
            body.push_str(&format!(",v{i}"));
        }
        body.push('\n');
        for t in 0..12 {
            body.push_str(&(t * 300).to_string());
            for i in 0..207 {
                body.push_str(&format!(",{}", 40 + (i + t) % 30));
            }
            body.push('\n');
        }
        let t = load_series(write(&dir, "metr.csv", &body)).unwrap();
        assert_eq!(t.n(), 207);
        assert_eq!(t.len(), 12);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = write(&dir, "r.csv", "timestamp,v0,v1\n0,1,2\n300,2\n");
        assert!(matches!(load_series(&ragged), Err(Error::Parse { .. })));
        let unsorted = write(&dir, "u.csv", "timestamp,v0\n300,1\n0,2\n");
        assert!(load_series(&unsorted).is_err());
        let junk = write(&dir, "j.csv", "timestamp,v0\n0,abc\n");
        assert!(load_series(&junk).is_err());
        let header = write(&dir, "h.csv", "time,v0\n0,1\n");
        assert!(load_series(&header).is_err());
        assert!(matches!(load_series(dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn weekly_series() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "ili.csv", "week,region_0,region_1\n2015-W52,3,4\n2015-W53,0,5\n2016-W01,1,1\n");
        let t = load_series(&p).unwrap();
        assert_eq!(t.len(), 3);
        assert!(!t.row_mask(1)[0]);
        let labelled = write(&dir, "t.csv", "timestamp,v0\n2015-W52,3\n2015-W53,4\n");
        assert!(matches!(load_series(&labelled).unwrap().timestamps(), Timestamps::IsoWeek(_)));
        let gap = write(&dir, "gap.csv", "week,region_0\n2015-W50,3\n2015-W52,3\n");
        assert!(load_series(&gap).is_err());
    }

    #[test]
    fn edges_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = DirectedGraph::new(4, vec![(0, 1), (3, 2), (1, 3)]).unwrap();
        let p = dir.path().join("e.csv");
        write_edges(&p, &g).unwrap();
        assert_eq!(load_edges(&p, Some(4)).unwrap(), g);
        let bad = write(&dir, "b.csv", "src,dst\n0,0\n");
        assert!(load_edges(&bad, None).is_err());
        let hdr = write(&dir, "c.csv", "a,b\n0,1\n");
        assert!(load_edges(&hdr, None).is_err());
    }

    #[test]
    fn populations() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "region,N\nregion_1,20\nregion_0,10\n");
        assert_eq!(load_populations(&p).unwrap(), vec![10.0, 20.0]);
        let dup = write(&dir, "d.csv", "region,N\n0,1\n0,2\n");
        assert!(load_populations(&dup).is_err());
        let neg = write(&dir, "n.csv", "region,N\n0,-1\n");
        assert!(load_populations(&neg).is_err());
    }
}
