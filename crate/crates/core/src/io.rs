//! Point-cloud and IMU stream files.
//!
//! Point clouds are ASCII PLY (`x y z [time]`) or CSV `x,y,z,t`; IMU streams
//! are CSV with header `t,gx,gy,gz,ax,ay,az`. Numbers are written in their
//! shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{LioError, Result};
use crate::pointmap::TimedPoint;
use crate::propagation::ImuSample;

pub const IMU_CSV_HEADER: &str = "t,gx,gy,gz,ax,ay,az";
pub const POINT_CSV_HEADER: &str = "x,y,z,t";

fn parse_fields(line: usize, text: &str, sep: Option<char>, expected: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = match sep {
        Some(c) => text.split(c).map(str::trim).collect(),
        None => text.split_whitespace().collect(),
    };
    if fields.len() != expected {
        return Err(LioError::Parse { line, msg: format!("expected {expected} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(LioError::Parse { line, msg: format!("invalid number `{f}`") }),
        })
        .collect()
}

pub fn imu_to_csv(samples: &[ImuSample]) -> String {
    let mut out = format!("{IMU_CSV_HEADER}\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z);
    }
    out
}

pub fn parse_imu_csv(text: &str) -> Result<Vec<ImuSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == IMU_CSV_HEADER => {}
        _ => return Err(LioError::Parse { line: 1, msg: format!("expected header `{IMU_CSV_HEADER}`") }),
    }
    let mut out: Vec<ImuSample> = Vec::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let v = parse_fields(idx + 1, raw, Some(','), 7)?;
        if out.last().is_some_and(|s| !(v[0] > s.t)) {
            return Err(LioError::Parse { line: idx + 1, msg: "timestamps must increase".into() });
        }
        out.push(ImuSample::new(v[0], Vector3::new(v[1], v[2], v[3]), Vector3::new(v[4], v[5], v[6])));
    }
    Ok(out)
}

pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<()> {
    Ok(std::fs::write(path, imu_to_csv(samples))?)
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>> {
    parse_imu_csv(&std::fs::read_to_string(path)?)
}

pub fn points_to_ply(points: &[TimedPoint]) -> String {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nproperty double time\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(out, "{} {} {} {}", p.p.x, p.p.y, p.p.z, p.tau);
    }
    out
}

/// ASCII PLY with vertex properties `x`, `y`, `z` and optionally `time`, in
/// any order; other properties are ignored.
pub fn parse_ply(text: &str) -> Result<Vec<TimedPoint>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(LioError::Parse { line: 1, msg: "missing `ply` magic".into() });
    }
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    let mut header_end = None;
    for (idx, raw) in lines.by_ref() {
        let line = idx + 1;
        let words: Vec<&str> = raw.split_whitespace().collect();
        match words.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => return Err(LioError::Parse { line, msg: format!("unsupported format `{fmt}`") }),
            ["format", ..] | ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|_| LioError::Parse { line, msg: format!("invalid count `{n}`") })?);
                } else if count.is_none() {
                    return Err(LioError::Parse { line, msg: "vertex element must come first".into() });
                }
            }
            ["property", "list", ..] if in_vertex => return Err(LioError::Parse { line, msg: "list properties unsupported".into() }),
            ["property", _, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["end_header"] => {
                header_end = Some(line);
                break;
            }
            _ => return Err(LioError::Parse { line, msg: format!("unexpected header line `{raw}`") }),
        }
    }
    let header_end = header_end.ok_or(LioError::Parse { line: 1, msg: "missing end_header".into() })?;
    let count = count.ok_or(LioError::Parse { line: header_end, msg: "no vertex element".into() })?;
    let find = |name: &str| props.iter().position(|p| p == name);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(LioError::Parse { line: header_end, msg: "vertex needs x, y, z".into() });
    };
    let it = find("time").or_else(|| find("t"));
    let mut out = Vec::with_capacity(count);
    for (idx, raw) in lines {
        if out.len() == count {
            break;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let v = parse_fields(idx + 1, raw, None, props.len())?;
        out.push(TimedPoint::new(Vector3::new(v[ix], v[iy], v[iz]), it.map_or(0.0, |i| v[i])));
    }
    if out.len() != count {
        return Err(LioError::Parse { line: text.lines().count(), msg: format!("expected {count} vertices, found {}", out.len()) });
    }
    Ok(out)
}

pub fn points_to_csv(points: &[TimedPoint]) -> String {
    let mut out = format!("{POINT_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.p.x, p.p.y, p.p.z, p.tau);
    }
    out
}

pub fn parse_points_csv(text: &str) -> Result<Vec<TimedPoint>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || (idx == 0 && trimmed.starts_with('x')) {
            continue;
        }
        let v = parse_fields(idx + 1, trimmed, Some(','), 4)?;
        out.push(TimedPoint::new(Vector3::new(v[0], v[1], v[2]), v[3]));
    }
    Ok(out)
}

/// Reads `.ply` or `.csv` by extension.
pub fn read_points(path: &Path) -> Result<Vec<TimedPoint>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => parse_ply(&text),
        Some("csv") => parse_points_csv(&text),
        _ => Err(LioError::Config(format!("unknown point file extension: {}", path.display()))),
    }
}

pub fn write_points(path: &Path, points: &[TimedPoint]) -> Result<()> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => points_to_ply(points),
        Some("csv") => points_to_csv(points),
        _ => return Err(LioError::Config(format!("unknown point file extension: {}", path.display()))),
    };
    Ok(std::fs::write(path, text)?)
}
