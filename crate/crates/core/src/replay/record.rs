//! Flat CSV record format for demonstrations and buffer dumps.
//!
//! The first line is a metadata comment
//! `#lgr2 schema=<schema> env=<env> obs_dim=<n>`; the second is the column
//! header; then one row per transition. Observation vectors are spread over
//! `n` columns (`s_0 .. s_{n-1}`, `s_next_0 ..`), goals over 3 and actions over 4.
//!
//! `primitive_v1` columns: `s_*, g_0..g_2, a_0..a_3, r_l, s_next_*`.
//!
//! `subgoal_v1` columns: `trajectory, hindsight, s_*, g_star_0..2, g_0..2,
//! r_h, s_next_*, relabeled, episode_end, steps`. Rows of one trajectory are
//! contiguous and share the `trajectory` index.

use std::io::{BufRead, BufReader, Read, Write};

use super::{HigherBuffer, HigherTrajectory, LowerBuffer, PrimitiveTransition, SubgoalTransition};
use crate::env::{EnvKind, EnvState};
use crate::error::{Error, Result};

pub const RECORD_SCHEMA_PRIMITIVE: &str = "primitive_v1";
pub const RECORD_SCHEMA_SUBGOAL: &str = "subgoal_v1";

fn csv_err(e: csv::Error) -> Error {
    Error::input(format!("record format: {e}"))
}

fn header_cols(prefix: &str, n: usize, out: &mut Vec<String>) {
    out.extend((0..n).map(|i| format!("{prefix}_{i}")));
}

fn push_floats(vals: &[f64], out: &mut Vec<String>) {
    out.extend(vals.iter().map(|v| v.to_string()));
}

fn write_meta(w: &mut impl Write, schema: &str, kind: EnvKind, obs_dim: usize) -> Result<()> {
    writeln!(w, "#lgr2 schema={schema} env={kind} obs_dim={obs_dim}")?;
    Ok(())
}

fn read_meta(line: &str, schema: &str) -> Result<(EnvKind, usize)> {
    let rest = line
        .trim_end()
        .strip_prefix("#lgr2 ")
        .ok_or_else(|| Error::input("record file lacks the #lgr2 metadata line"))?;
    let mut found_schema = None;
    let mut kind = None;
    let mut dim = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("schema", v)) => found_schema = Some(v.to_string()),
            Some(("env", v)) => kind = Some(v.parse::<EnvKind>()?),
            Some(("obs_dim", v)) => {
                dim = Some(
                    v.parse::<usize>()
                        .map_err(|_| Error::input(format!("bad obs_dim `{v}`")))?,
                )
            }
            _ => return Err(Error::input(format!("unknown metadata field `{field}`"))),
        }
    }
    if found_schema.as_deref() != Some(schema) {
        return Err(Error::input(format!(
            "expected schema {schema}, found {found_schema:?}"
        )));
    }
    match (kind, dim) {
        (Some(k), Some(d)) => Ok((k, d)),
        _ => Err(Error::input("metadata line needs env and obs_dim")),
    }
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    at: usize,
}

impl Row<'_> {
    fn float(&mut self) -> Result<f64> {
        let v = self
            .rec
            .get(self.at)
            .ok_or_else(|| Error::input("record row too short"))?;
        self.at += 1;
        v.parse()
            .map_err(|_| Error::input(format!("bad number `{v}`")))
    }

    fn floats<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.float()?;
        }
        Ok(out)
    }

    fn state(&mut self, kind: EnvKind, dim: usize) -> Result<EnvState> {
        let obs = (0..dim).map(|_| self.float()).collect::<Result<Vec<_>>>()?;
        EnvState::from_obs(kind, &obs)
    }

    fn int(&mut self) -> Result<usize> {
        let v = self
            .rec
            .get(self.at)
            .ok_or_else(|| Error::input("record row too short"))?;
        self.at += 1;
        v.parse()
            .map_err(|_| Error::input(format!("bad integer `{v}`")))
    }

    fn flag(&mut self) -> Result<bool> {
        Ok(self.int()? != 0)
    }
}

pub fn write_primitive_records(
    w: impl Write,
    kind: EnvKind,
    obs_dim: usize,
    transitions: &[PrimitiveTransition],
) -> Result<()> {
    let mut w = w;
    write_meta(&mut w, RECORD_SCHEMA_PRIMITIVE, kind, obs_dim)?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header = Vec::new();
    header_cols("s", obs_dim, &mut header);
    header_cols("g", 3, &mut header);
    header_cols("a", 4, &mut header);
    header.push("r_l".into());
    header_cols("s_next", obs_dim, &mut header);
    csv.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for t in transitions {
        if t.s.kind != kind || t.s.obs_dim() != obs_dim || t.s_next.obs_dim() != obs_dim {
            return Err(Error::input("transition does not match the record layout"));
        }
        row.clear();
        push_floats(&t.s.to_obs(), &mut row);
        push_floats(&t.g, &mut row);
        push_floats(&t.a, &mut row);
        push_floats(&[t.r_l], &mut row);
        push_floats(&t.s_next.to_obs(), &mut row);
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_primitive_records(r: impl Read) -> Result<(EnvKind, Vec<PrimitiveTransition>)> {
    let mut r = BufReader::new(r);
    let mut meta = String::new();
    r.read_line(&mut meta)?;
    let (kind, dim) = read_meta(&meta, RECORD_SCHEMA_PRIMITIVE)?;
    let mut csv = csv::Reader::from_reader(r);
    let width = 2 * dim + 8;
    if csv.headers().map_err(csv_err)?.len() != width {
        return Err(Error::input(format!("expected {width} columns")));
    }
    let mut out = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(csv_err)?;
        let mut row = Row { rec: &rec, at: 0 };
        out.push(PrimitiveTransition {
            s: row.state(kind, dim)?,
            g: row.floats()?,
            a: row.floats()?,
            r_l: row.float()?,
            s_next: row.state(kind, dim)?,
        });
    }
    Ok((kind, out))
}

/// Writes trajectories with their hindsight flag.
pub fn write_subgoal_records(
    w: impl Write,
    kind: EnvKind,
    obs_dim: usize,
    trajectories: &[(HigherTrajectory, bool)],
) -> Result<()> {
    let mut w = w;
    write_meta(&mut w, RECORD_SCHEMA_SUBGOAL, kind, obs_dim)?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["trajectory".to_string(), "hindsight".to_string()];
    header_cols("s", obs_dim, &mut header);
    header_cols("g_star", 3, &mut header);
    header_cols("g", 3, &mut header);
    header.push("r_h".into());
    header_cols("s_next", obs_dim, &mut header);
    header.extend(["relabeled", "episode_end", "steps"].map(String::from));
    csv.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, (sigma, hindsight)) in trajectories.iter().enumerate() {
        for t in &sigma.transitions {
            if t.s.kind != kind || t.s.obs_dim() != obs_dim || t.s_next.obs_dim() != obs_dim {
                return Err(Error::input("transition does not match the record layout"));
            }
            row.clear();
            row.push(i.to_string());
            row.push(u8::from(*hindsight).to_string());
            push_floats(&t.s.to_obs(), &mut row);
            push_floats(&t.g_star, &mut row);
            push_floats(&t.g, &mut row);
            push_floats(&[t.r_h], &mut row);
            push_floats(&t.s_next.to_obs(), &mut row);
            row.push(u8::from(t.relabeled).to_string());
            row.push(u8::from(t.episode_end).to_string());
            row.push(t.steps.to_string());
            csv.write_record(&row).map_err(csv_err)?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_subgoal_records(
    r: impl Read,
) -> Result<(EnvKind, usize, Vec<(HigherTrajectory, bool)>)> {
    let mut r = BufReader::new(r);
    let mut meta = String::new();
    r.read_line(&mut meta)?;
    let (kind, dim) = read_meta(&meta, RECORD_SCHEMA_SUBGOAL)?;
    let mut csv = csv::Reader::from_reader(r);
    let width = 2 * dim + 12;
    if csv.headers().map_err(csv_err)?.len() != width {
        return Err(Error::input(format!("expected {width} columns")));
    }
    let mut out: Vec<(HigherTrajectory, bool)> = Vec::new();
    let mut current = None;
    for rec in csv.records() {
        let rec = rec.map_err(csv_err)?;
        let mut row = Row { rec: &rec, at: 0 };
        let id = row.int()?;
        let hindsight = row.flag()?;
        let t = SubgoalTransition {
            s: row.state(kind, dim)?,
            g_star: row.floats()?,
            g: row.floats()?,
            r_h: row.float()?,
            s_next: row.state(kind, dim)?,
            relabeled: row.flag()?,
            episode_end: row.flag()?,
            steps: row.int()?,
        };
        if current != Some(id) {
            out.push((HigherTrajectory::default(), hindsight));
            current = Some(id);
        }
        out.last_mut().expect("pushed above").0.transitions.push(t);
    }
    Ok((kind, dim, out))
}

impl LowerBuffer {
    /// Dumps the buffer contents (oldest first) in the `primitive_v1` format.
    pub fn dump(&self, w: impl Write) -> Result<()> {
        let ts: Vec<_> = self.iter().cloned().collect();
        write_primitive_records(w, self.kind, self.obs_dim, &ts)
    }
}

impl HigherBuffer {
    /// Dumps all trajectories in the `subgoal_v1` format.
    pub fn dump(&self, w: impl Write) -> Result<()> {
        let ts: Vec<_> = (0..self.trajectory_count())
            .filter_map(|i| self.trajectory(i))
            .collect();
        write_subgoal_records(w, self.kind, self.obs_dim, &ts)
    }

    /// Rebuilds a buffer from a `subgoal_v1` dump.
    pub fn load(r: impl Read, capacity: usize) -> Result<Self> {
        let (kind, dim, ts) = read_subgoal_records(r)?;
        let mut b = HigherBuffer::new(kind, dim, capacity);
        for (sigma, hindsight) in &ts {
            b.push_trajectory(sigma, *hindsight)?;
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{scripted_demo, Env, EnvConfig};

    #[test]
    fn demo_round_trip() {
        let mut env = Env::new(&EnvConfig::new(EnvKind::Bin)).unwrap();
        env.reset(4);
        let demo = scripted_demo(&mut env, 4).unwrap();
        let mut buf = Vec::new();
        write_primitive_records(&mut buf, EnvKind::Bin, env.obs_dim(), &demo).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#lgr2 schema=primitive_v1 env=bin obs_dim=20\ns_0,"));
        let (kind, back) = read_primitive_records(buf.as_slice()).unwrap();
        assert_eq!(kind, EnvKind::Bin);
        assert_eq!(back, demo);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = "#lgr2 schema=subgoal_v1 env=bin obs_dim=20\n";
        assert!(read_primitive_records(text.as_bytes()).is_err());
    }
}
