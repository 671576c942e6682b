//! Simple undirected graphs stored as a packed upper-triangular bit array.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UndirectedGraph {
    n: usize,
    bits: Vec<u64>,
    edges: usize,
}

impl UndirectedGraph {
    pub fn empty(n: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        Self { n, bits: vec![0; pairs.div_ceil(64)], edges: 0 }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.set(i, j, true);
            }
        }
        g
    }

    /// Graph with the given edges; self-loops and out-of-range nodes are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            g.set(i, j, true);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_dyads(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn n_edges(&self) -> usize {
        self.edges
    }

    pub fn density(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.edges as f64 / self.n_dyads() as f64
        }
    }

    /// Position of dyad `{i, j}` (`i != j`) in the packed array.
    #[inline]
    pub fn dyad_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let k = self.dyad_index(i, j);
        (self.bits[k >> 6] >> (k & 63)) & 1 == 1
    }

    /// Sets dyad `{i, j}`; returns whether the state changed.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) -> bool {
        debug_assert!(i != j && i < self.n && j < self.n);
        let k = self.dyad_index(i, j);
        let mask = 1u64 << (k & 63);
        let word = &mut self.bits[k >> 6];
        let was = *word & mask != 0;
        if was == on {
            return false;
        }
        if on {
            *word |= mask;
            self.edges += 1;
        } else {
            *word &= !mask;
            self.edges -= 1;
        }
        true
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&w| self.has_edge(i, w))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// All edges `(i, j)` with `i < j`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Number of common neighbours of `i` and `j`, by an O(n) scan.
    pub fn common_neighbors(&self, i: usize, j: usize) -> usize {
        (0..self.n).filter(|&w| w != i && w != j && self.has_edge(i, w) && self.has_edge(j, w)).count()
    }

    /// Edge list text: first line `# n <nodes>`, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# n {}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Parses an edge list. The node count comes from a `# n <nodes>` header
    /// when present, else from `n_hint`, else from the largest node id.
    /// Both orientations of a pair may appear; they must agree.
    pub fn read_edge_list<R: BufRead>(reader: R, n_hint: Option<usize>) -> Result<Self> {
        let mut n = n_hint;
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("n") {
                    if let Some(v) = it.next() {
                        n = Some(v.parse().map_err(|_| Error::Parse(format!("bad node count {v:?}")))?);
                    }
                }
                continue;
            }
            let mut it = t.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.ok_or_else(|| Error::Parse(format!("line {}: expected two node ids", lineno + 1)))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad node id", lineno + 1)))
            };
            let i = parse(it.next())?;
            let j = parse(it.next())?;
            pairs.push((i, j));
        }
        let n = n.unwrap_or_else(|| pairs.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
        Self::from_edges(n, &pairs)
    }

    /// Dense 0/1 CSV, one row per node.
    pub fn to_dense_csv(&self) -> String {
        let mut s = String::with_capacity(self.n * self.n * 2);
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    s.push(',');
                }
                s.push(if self.has_edge(i, j) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    /// Parses a dense 0/1 CSV, validating squareness, symmetry and a zero diagonal.
    pub fn read_dense_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<u8>> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| match c.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Parse(format!("matrix entry {other:?} is not 0/1"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        let mut g = Self::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0 {
                return Err(Error::Parse(format!("non-zero diagonal at node {i}")));
            }
            for j in i + 1..n {
                if row[j] != rows[j][i] {
                    return Err(Error::Parse(format!("matrix not symmetric at ({i}, {j})")));
                }
                if row[j] == 1 {
                    g.set(i, j, true);
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyad_indexing_is_a_bijection() {
        let g = UndirectedGraph::empty(7);
        let mut seen = vec![false; g.n_dyads()];
        for i in 0..7 {
            for j in i + 1..7 {
                let k = g.dyad_index(i, j);
                assert_eq!(k, g.dyad_index(j, i));
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn symmetric_and_loop_free() {
        let mut g = UndirectedGraph::empty(4);
        assert!(g.set(2, 1, true));
        assert!(!g.set(1, 2, true));
        assert!(g.has_edge(1, 2) && g.has_edge(2, 1));
        assert!(!g.has_edge(1, 1));
        assert_eq!(g.n_edges(), 1);
        assert!(UndirectedGraph::from_edges(3, &[(1, 1)]).is_err());
        assert_eq!(UndirectedGraph::complete(5).n_edges(), 10);
    }

    #[test]
    fn edge_list_round_trip() {
        let g = UndirectedGraph::from_edges(6, &[(0, 1), (1, 2), (4, 5)]).unwrap();
        let text = g.to_edge_list();
        let back = UndirectedGraph::read_edge_list(text.as_bytes(), None).unwrap();
        assert_eq!(back, g);
        let plain = UndirectedGraph::read_edge_list("0 1\n1 0\n2 3\n".as_bytes(), None).unwrap();
        assert_eq!(plain.n(), 4);
        assert_eq!(plain.n_edges(), 2);
    }

    #[test]
    fn dense_csv_validation() {
        let g = UndirectedGraph::from_edges(3, &[(0, 2)]).unwrap();
        let back = UndirectedGraph::read_dense_csv(g.to_dense_csv().as_bytes()).unwrap();
        assert_eq!(back, g);
        assert!(UndirectedGraph::read_dense_csv("0,1\n0,0\n".as_bytes()).is_err());
        assert!(UndirectedGraph::read_dense_csv("1,0\n0,0\n".as_bytes()).is_err());
        assert!(UndirectedGraph::read_dense_csv("0,1,0\n1,0\n".as_bytes()).is_err());
    }
}
