use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Rectangular observation window `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !([xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) && xmin < xmax && ymin < ymax) {
            return Err(Error::InvalidArgument(format!(
                "invalid window [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, side, 0.0, side)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    pub fn sample(&self, rng: &mut Rng) -> [f64; 2] {
        [rng.random_range(self.xmin..self.xmax), rng.random_range(self.ymin..self.ymax)]
    }
}

#[inline]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// A finite set of distinct points inside a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<[f64; 2]>,
    window: Window,
}

impl PointPattern {
    pub fn new(points: Vec<[f64; 2]>, window: Window) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::InvalidArgument(format!("point ({}, {}) outside window", p[0], p[1])));
        }
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate points".into()));
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self { points: Vec::new(), window }
    }

    /// Caller guarantees the pattern invariants.
    pub(crate) fn from_parts_unchecked(points: Vec<[f64; 2]>, window: Window) -> Self {
        Self { points, window }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn into_points(self) -> Vec<[f64; 2]> {
        self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest pairwise distance, `+inf` for fewer than two points.
    pub fn min_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (i, &a) in self.points.iter().enumerate() {
            for &b in &self.points[i + 1..] {
                m = m.min(dist(a, b));
            }
        }
        m
    }

    /// Up to `n` uniform points, each rejected if it falls within `hard_core`
    /// of an earlier one.
    pub fn binomial_hard_core(n: usize, window: Window, hard_core: f64, rng: &mut Rng) -> Self {
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
        let max_tries = 1000 * n.max(1);
        let mut tries = 0;
        while pts.len() < n && tries < max_tries {
            tries += 1;
            let p = window.sample(rng);
            if pts.iter().all(|&q| dist(p, q) > hard_core) {
                pts.push(p);
            }
        }
        if pts.len() < n {
            log::warn!("placed {} of {n} points under the hard core", pts.len());
        }
        Self { points: pts, window }
    }

    /// CSV with header `x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "y"]).map_err(csv_err)?;
        for p in &self.points {
            wr.write_record([format!("{:?}", p[0]), format!("{:?}", p[1])]).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, window: Window) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(csv_err)?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::Parse("pattern CSV must have header x,y".into()));
        }
        let mut pts = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let x: f64 = rec[0].trim().parse().map_err(|_| Error::Parse(format!("bad x '{}'", &rec[0])))?;
            let y: f64 = rec[1].trim().parse().map_err(|_| Error::Parse(format!("bad y '{}'", &rec[1])))?;
            pts.push([x, y]);
        }
        Self::new(pts, window)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn validation() {
        let w = Window::square(10.0).unwrap();
        assert!(PointPattern::new(vec![[1.0, 1.0], [11.0, 1.0]], w).is_err());
        assert!(PointPattern::new(vec![[1.0, 1.0], [1.0, 1.0]], w).is_err());
        assert!(PointPattern::new(vec![[1.0, 1.0], [2.0, 1.0]], w).is_ok());
        assert!(Window::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = Window::square(100.0).unwrap();
        let p = PointPattern::binomial_hard_core(30, w, 5.0, &mut stream(1, 0));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x,y\n"));
        let q = PointPattern::read_csv(buf.as_slice(), w).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn hard_core_initial_pattern() {
        let w = Window::square(200.0).unwrap();
        let p = PointPattern::binomial_hard_core(100, w, 5.0, &mut stream(2, 0));
        assert_eq!(p.len(), 100);
        assert!(p.min_distance() > 5.0);
    }
}
