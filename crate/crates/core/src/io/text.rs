//! Line-oriented text documents.

use super::{read_string, write_bytes, FormatError};
use crate::eval::SequenceReport;
use crate::geometry::RigidTransform;
use crate::pose_graph::{Edge, GlobalPoses, GraphError, PairValidity, PoseGraph};
use nalgebra::{Matrix3, Vector3};
use std::fmt::Write as _;
use std::path::Path;

fn text_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Text {
        line,
        reason: reason.into(),
    }
}

/// Non-comment, non-blank lines with 1-based line numbers.
fn content_lines(s: &str) -> impl Iterator<Item = (usize, &str)> {
    s.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(line: usize, tok: &str) -> Result<f64, FormatError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| text_err(line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(text_err(line, format!("`{tok}` is not finite")));
    }
    Ok(v)
}

fn parse_usize(line: usize, tok: &str) -> Result<usize, FormatError> {
    tok.parse()
        .map_err(|_| text_err(line, format!("`{tok}` is not a non-negative integer")))
}

fn parse_flag(line: usize, tok: &str) -> Result<bool, FormatError> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(text_err(line, format!("flag `{tok}` must be 0 or 1"))),
    }
}

fn check_rotation(line: usize, r: &Matrix3<f64>) -> Result<(), FormatError> {
    let orth = (r.transpose() * r - Matrix3::identity()).norm();
    if orth > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
        return Err(text_err(line, "rotation block is not in SO(3)"));
    }
    Ok(())
}

fn push_floats(out: &mut String, xs: impl IntoIterator<Item = f64>) {
    for x in xs {
        write!(out, " {x}").unwrap();
    }
}

pub fn format_poses(poses: &GlobalPoses) -> String {
    let mut out = String::from(
        "# hopose poses\n# frame recovered m00 m01 m02 m03 m10 m11 m12 m13 m20 m21 m22 m23 m30 m31 m32 m33\n# world-to-camera 4x4, row-major\n",
    );
    for (k, (p, rec)) in poses.poses().iter().zip(poses.recovered()).enumerate() {
        write!(out, "{k} {}", *rec as u8).unwrap();
        let m = p.to_homogeneous();
        push_floats(&mut out, (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).map(|rc| m[rc]));
        out.push('\n');
    }
    out
}

pub fn parse_poses(s: &str) -> Result<GlobalPoses, FormatError> {
    let mut poses = Vec::new();
    let mut recovered = Vec::new();
    for (line, l) in content_lines(s) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 18 {
            return Err(text_err(line, format!("expected 18 fields, found {}", toks.len())));
        }
        let frame = parse_usize(line, toks[0])?;
        if frame != poses.len() {
            return Err(text_err(line, format!("expected frame {}, found {frame}", poses.len())));
        }
        let rec = parse_flag(line, toks[1])?;
        let m: Vec<f64> = toks[2..].iter().map(|t| parse_f64(line, t)).collect::<Result<_, _>>()?;
        if m[12..] != [0.0, 0.0, 0.0, 1.0] {
            return Err(text_err(line, "last matrix row must be 0 0 0 1"));
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        check_rotation(line, &r)?;
        poses.push(RigidTransform::from_parts_unchecked(r, Vector3::new(m[3], m[7], m[11])));
        recovered.push(rec);
    }
    Ok(GlobalPoses::new(poses, recovered))
}

pub fn format_graph(g: &PoseGraph) -> String {
    let mut out = String::from(
        "# hopose pose graph\n# from to r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2 weight quality rescued\n",
    );
    writeln!(out, "frames {}", g.n_frames()).unwrap();
    for e in g.edges() {
        write!(out, "{} {}", e.from, e.to).unwrap();
        push_floats(&mut out, (0..3).flat_map(|r| (0..3).map(move |c| e.rotation[(r, c)])));
        push_floats(&mut out, e.translation.iter().copied());
        push_floats(&mut out, [e.weight, e.quality]);
        writeln!(out, " {}", e.rescued as u8).unwrap();
    }
    out
}

pub fn parse_graph(s: &str) -> Result<PoseGraph, FormatError> {
    let mut lines = content_lines(s);
    let (line, l) = lines.next().ok_or_else(|| text_err(0, "missing `frames` line"))?;
    let n_frames = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["frames", n] => parse_usize(line, n)?,
        _ => return Err(text_err(line, "expected `frames <count>`")),
    };
    let mut edges = Vec::new();
    let mut at = Vec::new();
    for (line, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 17 {
            return Err(text_err(line, format!("expected 17 fields, found {}", toks.len())));
        }
        let from = parse_usize(line, toks[0])?;
        let to = parse_usize(line, toks[1])?;
        let v: Vec<f64> = toks[2..16].iter().map(|t| parse_f64(line, t)).collect::<Result<_, _>>()?;
        edges.push(Edge {
            from,
            to,
            rotation: Matrix3::from_row_slice(&v[..9]),
            translation: Vector3::new(v[9], v[10], v[11]),
            weight: v[12],
            quality: v[13],
            rescued: parse_flag(line, toks[16])?,
        });
        at.push((from, to, line));
    }
    PoseGraph::new(n_frames, edges).map_err(|e| match e {
        GraphError::InvalidEdge { from, to, reason } => {
            let line = at
                .iter()
                .rev()
                .find(|(f, t, _)| (*f, *t) == (from, to))
                .map_or(0, |x| x.2);
            text_err(line, reason)
        }
        other => text_err(0, other.to_string()),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn format_report(r: &SequenceReport) -> String {
    let mut out = String::from("# hopose sequence report\n");
    for (k, v) in [
        ("rot_error_deg", opt(r.rot_error_deg)),
        ("trans_error", opt(r.trans_error)),
        ("trans_rmse", opt(r.trans_rmse)),
        ("det_rate_pct", r.det_rate_pct.to_string()),
        ("acc_15_15_pct", opt(r.acc_15_15_pct)),
        ("acc_30_30_pct", opt(r.acc_30_30_pct)),
        ("n_frames", r.n_frames.to_string()),
        ("n_recovered", r.n_recovered.to_string()),
        ("partial", r.partial().to_string()),
    ] {
        writeln!(out, "{k} = {v}").unwrap();
    }
    out
}

pub fn parse_report(s: &str) -> Result<SequenceReport, FormatError> {
    const KEYS: [&str; 9] = [
        "rot_error_deg",
        "trans_error",
        "trans_rmse",
        "det_rate_pct",
        "acc_15_15_pct",
        "acc_30_30_pct",
        "n_frames",
        "n_recovered",
        "partial",
    ];
    let mut vals: [Option<(usize, &str)>; 9] = [None; 9];
    for (line, l) in content_lines(s) {
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| text_err(line, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        let idx = KEYS
            .iter()
            .position(|x| *x == k)
            .ok_or_else(|| text_err(line, format!("unknown key `{k}`")))?;
        if vals[idx].replace((line, v)).is_some() {
            return Err(text_err(line, format!("duplicate key `{k}`")));
        }
    }
    let get = |idx: usize| vals[idx].ok_or_else(|| text_err(0, format!("missing key `{}`", KEYS[idx])));
    let opt_f = |idx: usize| -> Result<Option<f64>, FormatError> {
        let (line, v) = get(idx)?;
        if v == "none" {
            Ok(None)
        } else {
            parse_f64(line, v).map(Some)
        }
    };
    let (line, det) = get(3)?;
    let det_rate_pct = parse_f64(line, det)?;
    let (line, n) = get(6)?;
    let n_frames = parse_usize(line, n)?;
    let (line, n) = get(7)?;
    let n_recovered = parse_usize(line, n)?;
    let report = SequenceReport {
        rot_error_deg: opt_f(0)?,
        trans_error: opt_f(1)?,
        trans_rmse: opt_f(2)?,
        det_rate_pct,
        acc_15_15_pct: opt_f(4)?,
        acc_30_30_pct: opt_f(5)?,
        n_frames,
        n_recovered,
    };
    let (line, p) = get(8)?;
    if p != report.partial().to_string() {
        return Err(text_err(line, "`partial` disagrees with the frame counts"));
    }
    Ok(report)
}

pub fn format_pair_validity(v: &PairValidity) -> String {
    let mut out = String::from("# hopose pair validity\n# i j valid\n");
    for (i, j, ok) in v.entries() {
        writeln!(out, "{i} {j} {}", ok as u8).unwrap();
    }
    out
}

pub fn parse_pair_validity(s: &str) -> Result<PairValidity, FormatError> {
    let mut v = PairValidity::new();
    for (line, l) in content_lines(s) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(text_err(line, format!("expected 3 fields, found {}", toks.len())));
        }
        let (i, j) = (parse_usize(line, toks[0])?, parse_usize(line, toks[1])?);
        if i == j {
            return Err(text_err(line, "a frame cannot pair with itself"));
        }
        if v.get(i, j).is_some() {
            return Err(text_err(line, format!("pair ({i}, {j}) listed twice")));
        }
        v.insert(i, j, parse_flag(line, toks[2])?);
    }
    Ok(v)
}

pub fn read_poses(path: &Path) -> Result<GlobalPoses, FormatError> {
    parse_poses(&read_string(path)?)
}

pub fn write_poses(path: &Path, poses: &GlobalPoses) -> Result<(), FormatError> {
    write_bytes(path, format_poses(poses).as_bytes())
}

pub fn read_graph(path: &Path) -> Result<PoseGraph, FormatError> {
    parse_graph(&read_string(path)?)
}

pub fn write_graph(path: &Path, g: &PoseGraph) -> Result<(), FormatError> {
    write_bytes(path, format_graph(g).as_bytes())
}

pub fn read_report(path: &Path) -> Result<SequenceReport, FormatError> {
    parse_report(&read_string(path)?)
}

pub fn write_report(path: &Path, r: &SequenceReport) -> Result<(), FormatError> {
    write_bytes(path, format_report(r).as_bytes())
}

pub fn read_pair_validity(path: &Path) -> Result<PairValidity, FormatError> {
    parse_pair_validity(&read_string(path)?)
}

pub fn write_pair_validity(path: &Path, v: &PairValidity) -> Result<(), FormatError> {
    write_bytes(path, format_pair_validity(v).as_bytes())
}
