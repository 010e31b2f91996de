//! Bloch quantities tabulated on a uniform (g, S) grid and interpolated with
//! tensor-product cubic Lagrange stencils.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{BlochPoint, BlochProvider, BlochSolver, BLOCH_LEN, PARITY};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, StarkCase};

/// Grid resolution over [0, g₀] × [0, S_max] and interpolation stencil width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub n_g: usize,
    pub n_s: usize,
    /// Points per axis in the Lagrange stencil (4 = cubic, 6 = quintic).
    pub stencil: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_g: 129,
            n_s: 129,
            stencil: 4,
        }
    }
}

impl GridSpec {
    /// Default resolution for a parameter set. The equal-shift case has no S
    /// dependence, so its S axis is kept at the minimum.
    pub fn for_params(p: &PhysicalParams) -> Self {
        match p.stark_case {
            StarkCase::A => GridSpec::default(),
            StarkCase::B => GridSpec {
                n_s: MIN_GRID,
                ..GridSpec::default()
            },
        }
    }
}

pub const MAX_STENCIL: usize = 6;

pub const MIN_GRID: usize = 33;

#[derive(Clone, Debug)]
struct Axis {
    n: usize,
    hi: f64,
    step: f64,
}

impl Axis {
    fn new(n: usize, hi: f64) -> Self {
        Axis {
            n,
            hi,
            step: hi / (n - 1) as f64,
        }
    }

    fn node(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.hi
        } else {
            i as f64 * self.step
        }
    }

    /// Stencil base and local coordinate u ∈ [0, width − 1] of `v` within the
    /// nodes base..base+width. Exact node hits yield an integer u so that the
    /// stored value is returned unchanged.
    fn locate(&self, v: f64, width: usize) -> (usize, f64) {
        let t = (v / self.step).clamp(0.0, (self.n - 1) as f64);
        let base = (t.floor() as usize)
            .saturating_sub(width / 2 - 1)
            .min(self.n - width);
        let nearest = (t.round() as usize).min(self.n - 1);
        if self.node(nearest) == v {
            (base, (nearest - base) as f64)
        } else {
            (base, t - base as f64)
        }
    }
}

/// Lagrange weights for nodes at 0, 1, …, width − 1. At integer u the weights
/// are exactly one and zeros.
fn lagrange(u: f64, width: usize) -> [f64; MAX_STENCIL] {
    let mut w = [0.0; MAX_STENCIL];
    for (i, wi) in w.iter_mut().enumerate().take(width) {
        let mut num = 1.0;
        let mut den = 1.0;
        for j in 0..width {
            if j != i {
                num *= u - j as f64;
                den *= i as f64 - j as f64;
            }
        }
        *wi = num / den;
    }
    w
}

/// Precomputed table of [`BlochPoint`]s; g < 0 is served through parity.
#[derive(Clone, Debug)]
pub struct CoefficientCache {
    g_axis: Axis,
    s_axis: Axis,
    /// Row-major in g: node (i, j) at `i * n_s + j`.
    nodes: Vec<[f64; BLOCH_LEN]>,
    stencil: usize,
    slack: f64,
}

impl CoefficientCache {
    /// Solve every node with `solver`, in parallel.
    pub fn build(solver: &BlochSolver, grid: GridSpec) -> Result<Self> {
        if grid.stencil != 4 && grid.stencil != MAX_STENCIL {
            return Err(Error::invalid(format!(
                "interpolation stencil {} must be 4 or {MAX_STENCIL}",
                grid.stencil
            )));
        }
        if grid.n_g < MIN_GRID || grid.n_s < MIN_GRID {
            return Err(Error::invalid(format!(
                "cache grid {}x{} below the {MIN_GRID}x{MIN_GRID} minimum",
                grid.n_g, grid.n_s
            )));
        }
        let p = solver.params();
        let g_axis = Axis::new(grid.n_g, p.g0);
        let s_axis = Axis::new(grid.n_s, p.s_max());
        let nodes = (0..grid.n_g * grid.n_s)
            .into_par_iter()
            .map(|k| {
                let g = g_axis.node(k / grid.n_s);
                let s = s_axis.node(k % grid.n_s);
                solver
                    .bloch_point(g, s)
                    .map(|b| b.to_array())
                    .map_err(|e| Error::CacheNode {
                        g,
                        s,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CoefficientCache {
            g_axis,
            s_axis,
            nodes,
            stencil: grid.stencil,
            slack: 1e-9,
        })
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n_g: self.g_axis.n,
            n_s: self.s_axis.n,
            stencil: self.stencil,
        }
    }

    pub fn g_node(&self, i: usize) -> f64 {
        self.g_axis.node(i)
    }

    pub fn s_node(&self, j: usize) -> f64 {
        self.s_axis.node(j)
    }

    pub fn node(&self, i: usize, j: usize) -> BlochPoint {
        BlochPoint::from_array(&self.nodes[i * self.s_axis.n + j])
    }

    pub fn lookup(&self, g: f64, s: f64) -> Result<BlochPoint> {
        let ga = g.abs();
        if !(ga <= self.g_axis.hi * (1.0 + self.slack))
            || !(s >= 0.0 && s <= self.s_axis.hi * (1.0 + self.slack))
        {
            return Err(Error::OutOfRange { g, s });
        }
        let width = self.stencil;
        let (ib, u) = self.g_axis.locate(ga, width);
        let (jb, w) = self.s_axis.locate(s, width);
        let wg = lagrange(u, width);
        let ws = lagrange(w, width);
        let ns = self.s_axis.n;
        let mut out = [0.0; BLOCH_LEN];
        for (di, &a) in wg[..width].iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = (ib + di) * ns + jb;
            let mut acc = [0.0; BLOCH_LEN];
            for (dj, &b) in ws[..width].iter().enumerate() {
                if b == 0.0 {
                    continue;
                }
                let node = &self.nodes[row + dj];
                for k in 0..BLOCH_LEN {
                    acc[k] += b * node[k];
                }
            }
            for k in 0..BLOCH_LEN {
                out[k] += a * acc[k];
            }
        }
        if g < 0.0 {
            for (v, p) in out.iter_mut().zip(PARITY) {
                *v *= p;
            }
        }
        Ok(BlochPoint::from_array(&out))
    }
}

const MAGIC: &str = "cavity-fort bloch cache v1";

/// Everything the node values depend on, written with round-trip precision.
fn fingerprint(p: &PhysicalParams, grid: GridSpec) -> String {
    format!(
        "gamma={:?};kappa={:?};g0={:?};drive={:?};delta_p={:?};case={};n_max={};s_max={:?};grid={}x{};stencil={}",
        p.gamma,
        p.kappa,
        p.g0,
        p.drive,
        p.delta_p,
        p.stark_case,
        p.n_max,
        p.s_max(),
        grid.n_g,
        grid.n_s,
        grid.stencil
    )
}

/// File name unique to the parameters and grid the table depends on.
pub fn cache_file_name(p: &PhysicalParams, grid: GridSpec) -> String {
    format!("bloch-{:016x}.bin", crate::params::fnv1a64(fingerprint(p, grid).as_bytes()))
}

impl CoefficientCache {
    /// Write the table atomically: a text header followed by little-endian f64 node data.
    pub fn save(&self, params: &PhysicalParams, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            writeln!(w, "{MAGIC}")?;
            writeln!(w, "{}", fingerprint(params, self.grid()))?;
            for node in &self.nodes {
                for v in node {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()?;
        }
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Read a table written by [`save`](Self::save), refusing one built for
    /// different parameters or a different grid.
    pub fn load(params: &PhysicalParams, grid: GridSpec, path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Config(format!("{} is not a coefficient cache", path.display())));
        }
        line.clear();
        r.read_line(&mut line)?;
        let expected = fingerprint(params, grid);
        if line.trim_end() != expected {
            return Err(Error::Config(format!(
                "cache {} was built for different parameters",
                path.display()
            )));
        }
        let mut nodes = vec![[0.0; BLOCH_LEN]; grid.n_g * grid.n_s];
        let mut buf = [0u8; 8];
        for node in nodes.iter_mut() {
            for v in node.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
        }
        Ok(CoefficientCache {
            g_axis: Axis::new(grid.n_g, params.g0),
            s_axis: Axis::new(grid.n_s, params.s_max()),
            nodes,
            stencil: grid.stencil,
            slack: 1e-9,
        })
    }

    /// Load from `path` when it holds a matching table, otherwise build and save.
    pub fn load_or_build(solver: &BlochSolver, grid: GridSpec, path: &Path) -> Result<Self> {
        match Self::load(solver.params(), grid, path) {
            Ok(c) => Ok(c),
            Err(Error::Io(_)) | Err(Error::Config(_)) => {
                let c = Self::build(solver, grid)?;
                c.save(solver.params(), path)?;
                Ok(c)
            }
            Err(e) => Err(e),
        }
    }
}

impl BlochProvider for CoefficientCache {
    fn bloch(&self, g: f64, s: f64) -> Result<BlochPoint> {
        self.lookup(g, s)
    }
}
