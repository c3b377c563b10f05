use std::path::Path;

use urnlab::increments::AtomSpec;
use urnlab::{Error, IncrementDistribution, LatticePmf, LatticePoint, Result};

/// Increment law from a preset name, inline JSON or a JSON file.
pub fn distribution(text: &str) -> Result<IncrementDistribution> {
    let trimmed = text.trim();
    if !trimmed.starts_with('{') && Path::new(trimmed).is_file() {
        let body = std::fs::read_to_string(trimmed)
            .map_err(|e| Error::Parse(format!("cannot read {trimmed}: {e}")))?;
        return IncrementDistribution::parse(&body);
    }
    IncrementDistribution::parse(trimmed)
}

/// Initial composition: `delta0`, `uniform:a:b` (dimension one), an inline
/// JSON atom list or a pmf CSV file.
pub fn start(text: &str, dim: usize) -> Result<LatticePmf> {
    let trimmed = text.trim();
    if trimmed == "delta0" {
        return Ok(LatticePmf::delta0(dim));
    }
    if let Some(rest) = trimmed.strip_prefix("uniform:") {
        let (a, b) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected uniform:a:b, got {trimmed}")))?;
        if dim != 1 {
            return Err(Error::DimensionMismatch { expected: dim, got: 1 });
        }
        return LatticePmf::uniform_1d(int(a)?, int(b)?);
    }
    let pmf = if trimmed.starts_with('[') {
        let atoms: Vec<AtomSpec> =
            serde_json::from_str(trimmed).map_err(|e| Error::Parse(format!("u0 JSON: {e}")))?;
        let points: Vec<_> = atoms.into_iter().map(|a| (LatticePoint(a.point), a.prob)).collect();
        let d = points.first().map_or(dim, |(p, _)| p.dim());
        LatticePmf::from_points(d, &points)?
    } else if Path::new(trimmed).is_file() {
        let body = std::fs::read_to_string(trimmed)
            .map_err(|e| Error::Parse(format!("cannot read {trimmed}: {e}")))?;
        LatticePmf::from_csv(&body)?
    } else {
        return Err(Error::Parse(format!("unrecognized u0 {trimmed:?}")));
    };
    if pmf.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: pmf.dim(),
        });
    }
    Ok(pmf)
}

fn int(s: &str) -> Result<i64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not an integer: {s:?}")))
}

fn real(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

/// Comma list or `logspace:a:b:k` (k points from 10^a to 10^b, rounded).
pub fn n_list(text: &str) -> Result<Vec<u64>> {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("logspace:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected logspace:a:b:k, got {trimmed}")));
        }
        let (a, b) = (real(parts[0])?, real(parts[1])?);
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad point count {:?}", parts[2])))?;
        if k == 0 {
            return Err(Error::Parse("logspace needs at least one point".into()));
        }
        let mut out: Vec<u64> = (0..k)
            .map(|i| {
                let t = if k == 1 { a } else { a + (b - a) * i as f64 / (k - 1) as f64 };
                10f64.powf(t).round() as u64
            })
            .collect();
        out.dedup();
        return Ok(out);
    }
    trimmed
        .split(',')
        .map(|s| {
            let v = real(s)?;
            if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
                return Err(Error::Parse(format!("not a step count: {s:?}")));
            }
            Ok(v as u64)
        })
        .collect()
}

/// Grid of points in dimension `dim`: `linspace:a:b:k` (dimension one),
/// points separated by `;` with coordinates separated by `,`, or in
/// dimension one a plain comma list.
pub fn grid(text: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("linspace:") {
        if dim != 1 {
            return Err(Error::Parse("linspace grids are one-dimensional".into()));
        }
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected linspace:a:b:k, got {trimmed}")));
        }
        let (a, b) = (real(parts[0])?, real(parts[1])?);
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad point count {:?}", parts[2])))?;
        if k < 2 {
            return Err(Error::Parse("linspace needs at least two points".into()));
        }
        return Ok((0..k).map(|i| vec![a + (b - a) * i as f64 / (k - 1) as f64]).collect());
    }
    let points: Vec<Vec<f64>> = if dim == 1 && !trimmed.contains(';') {
        trimmed.split(',').map(|s| real(s).map(|v| vec![v])).collect::<Result<_>>()?
    } else {
        trimmed
            .split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.split(',').map(real).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?
    };
    for p in &points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::Parse("empty grid".into()));
    }
    Ok(points)
}

pub fn reals(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(real).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_lists() {
        assert_eq!(n_list("10,100, 1000").unwrap(), vec![10, 100, 1000]);
        assert_eq!(n_list("logspace:1:4:4").unwrap(), vec![10, 100, 1000, 10000]);
        assert_eq!(n_list("1e3").unwrap(), vec![1000]);
        assert!(n_list("1.5").is_err());
        assert!(n_list("logspace:1:2").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(grid("0.5,1", 1).unwrap(), vec![vec![0.5], vec![1.0]]);
        assert_eq!(grid("0.5,1", 2).unwrap(), vec![vec![0.5, 1.0]]);
        assert_eq!(grid("1,0;0,1", 2).unwrap().len(), 2);
        assert_eq!(grid("linspace:0:1:3", 1).unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert!(grid("1,2,3", 2).is_err());
    }

    #[test]
    fn starts() {
        assert_eq!(start("delta0", 2).unwrap().cells(), 1);
        assert_eq!(start("uniform:-2:2", 1).unwrap().cells(), 5);
        let p = start(r#"[{"point":[1],"prob":0.25},{"point":[3],"prob":0.75}]"#, 1).unwrap();
        assert_eq!(p.mean(), vec![2.5]);
        assert!(start("uniform:0:1", 2).is_err());
        assert!(start("nonsense", 1).is_err());
    }
}
