//! Binary dumps: a flat little-endian `f64` payload next to a text header
//! that names every dimension and the layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::currents::{CurrentCoefficients, ModeGrid, Provenance, SobolevIndex};
use crate::error::{Error, Result};
use crate::simulator::PathEnsemble;

pub const PATH_FORMAT: &str = "meanfield-paths 1";
pub const COEFFICIENT_FORMAT: &str = "meanfield-current-coefficients 1";

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".hdr");
    PathBuf::from(name)
}

fn write_f64s(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

fn read_f64s(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid(format!(
            "{} is not a whole number of 64-bit floats",
            path.display()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Parsed `key: value` header.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Header(pub BTreeMap<String, String>);

impl Header {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(sidecar(path))?;
        let mut map = BTreeMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(':') {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Header(map))
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::invalid(format!("dump header lacks `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::invalid(format!("dump header field `{key}` has bad value `{raw}`")))
    }
}

/// Write particle states to `path` and the header to `path.hdr`.
pub fn write_path_dump(path: &Path, ens: &PathEnsemble) -> Result<()> {
    let header = format!(
        "format: {PATH_FORMAT}\n\
         layout: little-endian f64, row-major (particle, time index, coordinate)\n\
         particles: {}\n\
         time_points: {}\n\
         dim: {}\n\
         t_end: {:e}\n\
         epsilon: {:e}\n\
         values: {}\n",
        ens.particles(),
        ens.steps() + 1,
        ens.dim(),
        ens.t_end(),
        ens.epsilon(),
        ens.states().len()
    );
    fs::write(sidecar(path), header)?;
    write_f64s(path, ens.states().iter().copied())
}

/// States of a path dump with `(particles, time_points, dim)`.
pub fn read_path_dump(path: &Path) -> Result<(Header, Vec<f64>)> {
    let header = Header::read(path)?;
    if header.get("format")? != PATH_FORMAT {
        return Err(Error::invalid("not a path dump"));
    }
    let data = read_f64s(path)?;
    let expected = header.parse::<usize>("particles")?
        * header.parse::<usize>("time_points")?
        * header.parse::<usize>("dim")?;
    Error::check_dim("path dump length", expected, data.len())?;
    Ok((header, data))
}

/// Write coefficients as interleaved `(re, im)` pairs in the `(k, n, ξ)`
/// layout of [`CurrentCoefficients`].
pub fn write_coefficients(path: &Path, cur: &CurrentCoefficients, s: SobolevIndex) -> Result<()> {
    let g = &cur.grid;
    let header = format!(
        "format: {COEFFICIENT_FORMAT}\n\
         layout: little-endian f64 pairs (re, im), row-major (component k, time mode n + n_max, frequency index with last axis fastest)\n\
         provenance: {}\n\
         dim: {}\n\
         n_max: {}\n\
         xi_max: {:e}\n\
         xi_points: {}\n\
         a: {:e}\n\
         b: {:e}\n\
         s1: {:e}\n\
         s2: {:e}\n\
         values: {}\n",
        cur.provenance.as_str(),
        g.d,
        g.n_max,
        g.xi_max,
        g.xi_points,
        g.a,
        g.b,
        s.s1,
        s.s2,
        cur.coeffs.len()
    );
    fs::write(sidecar(path), header)?;
    write_f64s(path, cur.coeffs.iter().flat_map(|c| [c.re, c.im]))
}

pub fn read_coefficients(path: &Path) -> Result<(CurrentCoefficients, SobolevIndex)> {
    let h = Header::read(path)?;
    if h.get("format")? != COEFFICIENT_FORMAT {
        return Err(Error::invalid("not a coefficient dump"));
    }
    let grid = ModeGrid {
        d: h.parse("dim")?,
        n_max: h.parse("n_max")?,
        xi_max: h.parse("xi_max")?,
        xi_points: h.parse("xi_points")?,
        a: h.parse("a")?,
        b: h.parse("b")?,
    };
    let provenance = Provenance::parse(h.get("provenance")?)
        .ok_or_else(|| Error::invalid("unknown provenance in coefficient dump"))?;
    let s = SobolevIndex {
        s1: h.parse("s1")?,
        s2: h.parse("s2")?,
    };
    let data = read_f64s(path)?;
    Error::check_dim("coefficient dump length", 2 * grid.len(), data.len())?;
    let coeffs = data
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    Ok((
        CurrentCoefficients {
            grid,
            provenance,
            coeffs,
        },
        s,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currents::current_fourier_coefficients;
    use crate::model::{CoefficientModel, InitialEnsemble};
    use crate::simulator::{simulate, SimConfig};

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("meanfield-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn path_and_coefficient_dumps_round_trip() {
        let model = CoefficientModel::linear_1d(-1.0, 0.5, 0.0, 1.0, 2.0).unwrap();
        let init = InitialEnsemble::normal_quantiles(6, 0.0, 1.0).unwrap();
        let ens = simulate(&model, &init, &SimConfig::new(6, 1.0, 12, 0.4).with_seed(3)).unwrap();
        let p = scratch("paths.bin");
        write_path_dump(&p, &ens).unwrap();
        let (h, data) = read_path_dump(&p).unwrap();
        assert_eq!(data, ens.states());
        assert_eq!(h.parse::<usize>("time_points").unwrap(), 13);

        let grid = ModeGrid {
            n_max: 2,
            xi_points: 5,
            ..ModeGrid::default_for(1, 1.0)
        };
        let cur = current_fourier_coefficients(&ens, &grid).unwrap();
        let c = scratch("coeffs.bin");
        let s = SobolevIndex::default_for(1);
        write_coefficients(&c, &cur, s).unwrap();
        let (back, s_back) = read_coefficients(&c).unwrap();
        assert_eq!(back, cur);
        assert_eq!(s_back, s);
    }
}
