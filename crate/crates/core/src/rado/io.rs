//! Plaintext rado files: a `# dim=D count=K` line, a column header, then one
//! rado per row as `peer,signature,pi_0,...,pi_{D-1}`.

use std::io::{BufRead, Write};

use super::{Rado, RadoError, RadoOrigin};
use crate::scalar::Scalar;

pub fn write_rados_csv<T: Scalar, W: Write>(mut w: W, rados: &[Rado<T>]) -> Result<(), RadoError> {
    let d = rados.first().map_or(0, |r| r.dim());
    let io = |e: std::io::Error| RadoError::Io(e.to_string());
    writeln!(w, "# dim={d} count={}", rados.len()).map_err(io)?;
    let mut header = vec!["peer".to_string(), "signature".to_string()];
    header.extend((0..d).map(|j| format!("pi_{j}")));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in rados {
        if r.dim() != d {
            return Err(RadoError::LengthMismatch {
                expected: d,
                got: r.dim(),
            });
        }
        let mut row = vec![
            r.origin.peer.map(|p| p.to_string()).unwrap_or_default(),
            r.origin.signature.map(|s| s.to_string()).unwrap_or_default(),
        ];
        row.extend(r.pi.iter().map(|v| v.approx_f64().to_string()));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    Ok(())
}

pub fn read_rados_csv<T: Scalar, R: BufRead>(r: R) -> Result<Vec<Rado<T>>, RadoError> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, msg: &str| RadoError::Io(format!("line {}: {msg}", line + 1));
    let (_, meta) = lines.next().ok_or(RadoError::Empty)?;
    let meta = meta.map_err(|e| RadoError::Io(e.to_string()))?;
    let mut dim = None;
    let mut count = None;
    for field in meta.trim_start_matches('#').split_whitespace() {
        if let Some(v) = field.strip_prefix("dim=") {
            dim = v.parse::<usize>().ok();
        } else if let Some(v) = field.strip_prefix("count=") {
            count = v.parse::<usize>().ok();
        }
    }
    let dim = dim.ok_or_else(|| bad(0, "missing dim"))?;
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let header = header.map_err(|e| RadoError::Io(e.to_string()))?;
    if header.split(',').count() != dim + 2 {
        return Err(bad(1, "header does not match dim"));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| RadoError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(bad(i, &format!("expected {} fields, got {}", dim + 2, fields.len())));
        }
        let opt = |s: &str| -> Result<Option<usize>, RadoError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(i, "bad origin"))
            }
        };
        let pi = fields[2..]
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map(T::from_f64_lossy)
                    .map_err(|_| bad(i, &format!("bad number {s:?}")))
            })
            .collect::<Result<Vec<T>, _>>()?;
        out.push(Rado {
            pi,
            origin: RadoOrigin {
                peer: opt(fields[0])?,
                signature: opt(fields[1])?,
            },
        });
    }
    if let Some(c) = count {
        if c != out.len() {
            return Err(RadoError::Io(format!("expected {c} rados, found {}", out.len())));
        }
    }
    Ok(out)
}
