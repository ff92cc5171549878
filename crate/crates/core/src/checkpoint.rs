//! Plain-text checkpoints of uniform states and windows.
//!
//! Each tensor is written as a shape header `tensor <name> <d> <D_l> <D_r>` followed
//! by one line per entry, `re im`, in row-major order over `(s, a, b)`. Floats are
//! printed in shortest round-trip form, so reading restores every bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg::dense::ComplexMatrix;
use crate::mps::MpsTensor;
use crate::uniform::UniformMps;
use crate::window::{Background, WindowMps};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "effspin-checkpoint";

fn push_tensor(out: &mut String, name: &str, t: &MpsTensor) {
    let _ = writeln!(out, "tensor {name} {} {} {}", t.d(), t.dl(), t.dr());
    for s in 0..t.d() {
        let m = t.mat(s);
        for a in 0..t.dl() {
            for b in 0..t.dr() {
                let z = m[(a, b)];
                let _ = writeln!(out, "{:e} {:e}", z.re, z.im);
            }
        }
    }
}

fn push_matrix(out: &mut String, name: &str, m: &ComplexMatrix) {
    let t = MpsTensor::new(vec![m.clone()]).expect("one component");
    push_tensor(out, name, &t);
}

struct Lines<R> {
    inner: R,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        let mut s = String::new();
        loop {
            s.clear();
            self.line += 1;
            if self.inner.read_line(&mut s)? == 0 {
                return Err(Error::Format(format!("unexpected end of file at line {}", self.line)));
            }
            let t = s.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(t.to_string());
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Format(format!("line {}: {msg}", self.line))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace().map(str::to_string);
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            other => Err(self.err(format!("expected `{key}`, found {other:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn tensor(&mut self, name: &str) -> Result<MpsTensor> {
        let head = self.keyed("tensor")?;
        if head.len() != 4 || head[0] != name {
            return Err(self.err(format!("expected tensor `{name}` with three dimensions")));
        }
        let (d, dl, dr): (usize, usize, usize) = (self.parse(&head[1])?, self.parse(&head[2])?, self.parse(&head[3])?);
        let mut mats = Vec::with_capacity(d);
        for _ in 0..d {
            let mut m = Mat::<c64>::zeros(dl, dr);
            for a in 0..dl {
                for b in 0..dr {
                    let l = self.next()?;
                    let mut it = l.split_whitespace();
                    let (re, im) = match (it.next(), it.next(), it.next()) {
                        (Some(re), Some(im), None) => (self.parse::<f64>(re)?, self.parse::<f64>(im)?),
                        _ => return Err(self.err("expected `re im`")),
                    };
                    m[(a, b)] = c64::new(re, im);
                }
            }
            mats.push(m);
        }
        MpsTensor::new(mats)
    }

    fn header(&mut self, kind: &str) -> Result<()> {
        let v = self.keyed(MAGIC)?;
        let version: u32 = match v.as_slice() {
            [ver] => self.parse(ver)?,
            _ => return Err(self.err("missing version")),
        };
        if version != FORMAT_VERSION {
            return Err(self.err(format!("unsupported version {version}")));
        }
        let k = self.keyed("kind")?;
        if k.len() != 1 || k[0] != kind {
            return Err(self.err(format!("expected a {kind} checkpoint, found {k:?}")));
        }
        Ok(())
    }

    fn dims(&mut self, key: &str) -> Result<Vec<usize>> {
        let v = self.keyed(key)?;
        v.iter().map(|s| self.parse(s)).collect()
    }
}

pub fn uniform_to_string(u: &UniformMps) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "kind uniform");
    let _ = writeln!(out, "cell_dims {}", join(&u.cell_dims));
    let _ = writeln!(out, "shape {} {}", u.d(), u.bond());
    push_tensor(&mut out, "al", &u.al);
    push_tensor(&mut out, "ar", &u.ar);
    push_matrix(&mut out, "c", &u.c);
    push_tensor(&mut out, "ac", &u.ac);
    out
}

pub fn read_uniform(r: impl BufRead) -> Result<UniformMps> {
    let mut lines = Lines { inner: r, line: 0 };
    lines.header("uniform")?;
    let cell_dims = lines.dims("cell_dims")?;
    let shape = lines.dims("shape")?;
    let al = lines.tensor("al")?;
    let ar = lines.tensor("ar")?;
    let c = lines.tensor("c")?.into_mats().remove(0);
    let ac = lines.tensor("ac")?;
    if shape.len() != 2 || shape[0] != al.d() || shape[1] != c.nrows() {
        return Err(Error::Format(format!("shape header {shape:?} does not match the tensors")));
    }
    if cell_dims.iter().product::<usize>() != al.d() {
        return Err(Error::Format("cell dimensions do not match the tensors".into()));
    }
    Ok(UniformMps {
        al,
        ar,
        c,
        ac,
        cell_dims,
    })
}

pub fn save_uniform(u: &UniformMps, path: &Path) -> Result<()> {
    write_file(path, &uniform_to_string(u))
}

pub fn load_uniform(path: &Path) -> Result<UniformMps> {
    read_uniform(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Window tensors with a reference to the checkpoint of their background.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowCheckpoint {
    pub background_ref: String,
    pub offset: isize,
    pub origin: isize,
    pub dims: Vec<Vec<usize>>,
    pub tensors: Vec<MpsTensor>,
}

impl WindowCheckpoint {
    pub fn from_window(w: &WindowMps, background_ref: &str) -> Self {
        Self {
            background_ref: background_ref.to_string(),
            offset: w.offset,
            origin: w.origin,
            dims: w.dims.clone(),
            tensors: w.tensors.clone(),
        }
    }

    pub fn into_window(self, background: Arc<Background>) -> Result<WindowMps> {
        WindowMps::new(background, self.tensors, self.dims, self.offset, self.origin)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "kind window");
        let _ = writeln!(out, "background {}", self.background_ref);
        let _ = writeln!(out, "offset {}", self.offset);
        let _ = writeln!(out, "origin {}", self.origin);
        let _ = writeln!(out, "cells {}", self.tensors.len());
        for (k, (t, d)) in self.tensors.iter().zip(&self.dims).enumerate() {
            let _ = writeln!(out, "sites {}", join(d));
            push_tensor(&mut out, &format!("b{k}"), t);
        }
        out
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = Lines { inner: r, line: 0 };
        lines.header("window")?;
        let bref = lines.keyed("background")?.join(" ");
        let offset = lines.keyed("offset")?;
        let origin = lines.keyed("origin")?;
        let cells = lines.keyed("cells")?;
        let one = |v: &[String], lines: &Lines<_>| -> Result<String> {
            match v {
                [x] => Ok(x.clone()),
                _ => Err(lines.err("expected one value")),
            }
        };
        let offset: isize = lines.parse(&one(&offset, &lines)?)?;
        let origin: isize = lines.parse(&one(&origin, &lines)?)?;
        let cells: usize = lines.parse(&one(&cells, &lines)?)?;
        let mut dims = Vec::with_capacity(cells);
        let mut tensors = Vec::with_capacity(cells);
        for k in 0..cells {
            dims.push(lines.dims("sites")?);
            tensors.push(lines.tensor(&format!("b{k}"))?);
        }
        Ok(Self {
            background_ref: bref,
            offset,
            origin,
            dims,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = UniformMps::random(vec![2, 2], 5, &mut rng, 1e-12).unwrap();
        let text = uniform_to_string(&u);
        let back = read_uniform(text.as_bytes()).unwrap();
        assert_eq!(back, u);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.ckpt");
        save_uniform(&u, &p).unwrap();
        assert_eq!(load_uniform(&p).unwrap(), u);
    }

    #[test]
    fn window_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = UniformMps::random(vec![2, 2], 3, &mut rng, 1e-12).unwrap();
        let bg = Arc::new(u.background().unwrap());
        let tensors = vec![MpsTensor::random(4, 3, 3, &mut rng), MpsTensor::random(2, 3, 3, &mut rng)];
        let w = WindowMps::new(bg.clone(), tensors, vec![vec![2, 2], vec![2]], -1, -2).unwrap();
        let ck = WindowCheckpoint::from_window(&w, "bg file.ckpt");
        let back = WindowCheckpoint::read(ck.to_text().as_bytes()).unwrap();
        assert_eq!(back, ck);
        let w2 = back.into_window(bg).unwrap();
        assert_eq!(w2.tensors, w.tensors);
        assert_eq!(w2.origin, -2);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = UniformMps::random(vec![2, 2], 2, &mut rng, 1e-12).unwrap();
        let text = uniform_to_string(&u);
        assert!(read_uniform(text.replace("effspin-checkpoint 1", "effspin-checkpoint 9").as_bytes()).is_err());
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_uniform(truncated.as_bytes()), Err(Error::Format(_))));
        assert!(read_uniform(text.replacen("tensor al", "tensor xx", 1).as_bytes()).is_err());
    }
}
