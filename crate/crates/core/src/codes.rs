//! LDPC code objects: degree profiles, PEG-built Tanner graphs, girth, alist
//! exchange files and a GF(2) systematic-where-possible encoder.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::stream::stream_rng;
use crate::{Error, Result};

const PROFILE_TOL: f64 = 1e-9;

/// Edge-perspective degree distribution: `vn_edge[i]` is the fraction of
/// edges attached to degree-`i` variable nodes, likewise for checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub vn_edge: BTreeMap<usize, f64>,
    pub cn_edge: BTreeMap<usize, f64>,
}

impl DegreeDistribution {
    pub fn new(vn_edge: BTreeMap<usize, f64>, cn_edge: BTreeMap<usize, f64>) -> Result<Self> {
        let d = DegreeDistribution { vn_edge, cn_edge };
        d.validate()?;
        Ok(d)
    }

    pub fn regular(dv: usize, dc: usize) -> Result<Self> {
        Self::new(BTreeMap::from([(dv, 1.0)]), BTreeMap::from([(dc, 1.0)]))
    }

    pub fn from_pairs(vn: &[(usize, f64)], cn: &[(usize, f64)]) -> Result<Self> {
        Self::new(vn.iter().copied().collect(), cn.iter().copied().collect())
    }

    pub fn validate(&self) -> Result<()> {
        for (side, map) in [("variable", &self.vn_edge), ("check", &self.cn_edge)] {
            if map.is_empty() {
                return Err(Error::InfeasibleProfile(format!("empty {side} profile")));
            }
            if map.keys().any(|&d| d < 2) {
                return Err(Error::InfeasibleProfile(format!("{side} degree below 2")));
            }
            if map.values().any(|&w| !w.is_finite() || w < 0.0) {
                return Err(Error::InfeasibleProfile(format!("negative {side} fraction")));
            }
            let total: f64 = map.values().sum();
            if (total - 1.0).abs() > PROFILE_TOL {
                return Err(Error::InfeasibleProfile(format!("{side} fractions sum to {total}")));
            }
        }
        let r = self.design_rate();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InfeasibleProfile(format!("design rate {r} outside (0, 1)")));
        }
        Ok(())
    }

    fn inverse_mean(map: &BTreeMap<usize, f64>) -> f64 {
        map.iter().map(|(&d, &w)| w / d as f64).sum()
    }

    /// `1 - (sum rho_j / j) / (sum lambda_i / i)`.
    pub fn design_rate(&self) -> f64 {
        1.0 - Self::inverse_mean(&self.cn_edge) / Self::inverse_mean(&self.vn_edge)
    }

    pub fn is_regular(&self) -> bool {
        self.vn_edge.len() == 1 && self.cn_edge.len() == 1
    }

    pub fn max_vn_degree(&self) -> usize {
        *self.vn_edge.keys().next_back().expect("validated")
    }

    pub fn max_cn_degree(&self) -> usize {
        *self.cn_edge.keys().next_back().expect("validated")
    }

    /// Node-perspective fractions of variable-node degrees.
    pub fn vn_node_fractions(&self) -> BTreeMap<usize, f64> {
        node_fractions(&self.vn_edge)
    }

    pub fn cn_node_fractions(&self) -> BTreeMap<usize, f64> {
        node_fractions(&self.cn_edge)
    }

    /// Node degree sequences for a code of length `n`, ascending.
    ///
    /// Counts are rounded by largest remainder; if the two sides then disagree
    /// on the edge count, single checks are moved one degree up (or down)
    /// until they match.
    pub fn degree_sequences(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let vn = apportion(&self.vn_node_fractions(), n);
        let edges: usize = vn.iter().sum();
        let m = (edges as f64 * Self::inverse_mean(&self.cn_edge)).round() as usize;
        if m == 0 {
            return Err(Error::InfeasibleProfile(format!("length {n} too short")));
        }
        let mut cn = apportion(&self.cn_node_fractions(), m);
        let mut cn_edges: usize = cn.iter().sum();
        let mut i = 0;
        while cn_edges < edges {
            cn[i % m] += 1;
            cn_edges += 1;
            i += 1;
        }
        let mut i = m;
        while cn_edges > edges {
            i = if i == 0 { m - 1 } else { i - 1 };
            if cn[i] > 2 {
                cn[i] -= 1;
                cn_edges -= 1;
            }
        }
        if cn_edges != edges {
            log::warn!("check degrees adjusted to match {edges} edges");
        }
        cn.sort_unstable();
        Ok((vn, cn))
    }
}

fn node_fractions(edge: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let total: f64 = edge.iter().map(|(&d, &w)| w / d as f64).sum();
    edge.iter().map(|(&d, &w)| (d, w / d as f64 / total)).collect()
}

/// Largest-remainder rounding of `count * fraction` per degree, ascending degrees.
fn apportion(fractions: &BTreeMap<usize, f64>, count: usize) -> Vec<usize> {
    let raw: Vec<(usize, f64)> = fractions.iter().map(|(&d, &f)| (d, f * count as f64)).collect();
    let mut counts: Vec<usize> = raw.iter().map(|(_, x)| x.floor() as usize).collect();
    let mut left = count - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a].1 - raw[a].1.floor();
        let rb = raw[b].1 - raw[b].1.floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    raw.iter()
        .zip(&counts)
        .flat_map(|(&(d, _), &c)| std::iter::repeat_n(d, c))
        .collect()
}

/// Sparse parity-check matrix as a bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TannerGraphRepr")]
pub struct TannerGraph {
    n: usize,
    checks: Vec<Vec<usize>>,
    #[serde(skip)]
    vars: Vec<Vec<usize>>,
}

impl TannerGraph {
    /// Builds a graph from per-check lists of variable indices.
    pub fn from_checks(n: usize, mut checks: Vec<Vec<usize>>) -> Result<Self> {
        let mut vars = vec![Vec::new(); n];
        for (c, list) in checks.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidParameter(format!("check {c} has a repeated edge")));
            }
            for &v in list.iter() {
                if v >= n {
                    return Err(Error::InvalidParameter(format!("check {c} references variable {v} >= {n}")));
                }
                vars[v].push(c);
            }
        }
        Ok(TannerGraph { n, checks, vars })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Checks adjacent to each variable node, ascending.
    pub fn vars(&self) -> &[Vec<usize>] {
        &self.vars
    }

    pub fn edge_count(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    pub fn vn_degrees(&self) -> Vec<usize> {
        self.vars.iter().map(Vec::len).collect()
    }

    pub fn cn_degrees(&self) -> Vec<usize> {
        self.checks.iter().map(Vec::len).collect()
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.m() as f64 / self.n as f64
    }

    /// Whether every check is satisfied by `word`.
    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|c| c.iter().fold(0u8, |acc, &v| acc ^ (word[v] & 1)) == 0)
    }

    /// SHA-256 of a canonical description of the check structure.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.m() as u64).to_le_bytes());
        for c in &self.checks {
            h.update((c.len() as u64).to_le_bytes());
            for &v in c {
                h.update((v as u64).to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the graph in alist format.
    pub fn write_alist<W: Write>(&self, mut w: W) -> Result<()> {
        let col_w = self.vn_degrees();
        let row_w = self.cn_degrees();
        let max_col = col_w.iter().copied().max().unwrap_or(0);
        let max_row = row_w.iter().copied().max().unwrap_or(0);
        let join = |xs: &mut dyn Iterator<Item = usize>| xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(w, "{} {}", self.n, self.m())?;
        writeln!(w, "{max_col} {max_row}")?;
        writeln!(w, "{}", join(&mut col_w.iter().copied()))?;
        writeln!(w, "{}", join(&mut row_w.iter().copied()))?;
        for list in &self.vars {
            let mut it = list.iter().map(|c| c + 1).chain(std::iter::repeat(0)).take(max_col);
            writeln!(w, "{}", join(&mut it))?;
        }
        for list in &self.checks {
            let mut it = list.iter().map(|v| v + 1).chain(std::iter::repeat(0)).take(max_row);
            writeln!(w, "{}", join(&mut it))?;
        }
        Ok(())
    }

    /// Parses an alist file; zero padding is ignored wherever it appears.
    pub fn read_alist<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
            line.split_whitespace().map(move |t| (i + 1, t))
        });
        let mut last_line = 0;
        let mut next = |what: &str| -> Result<usize> {
            let (line, tok) = tokens.next().ok_or(Error::Alist {
                line: last_line,
                msg: format!("unexpected end of file reading {what}"),
            })?;
            last_line = line;
            tok.parse::<usize>().map_err(|_| Error::Alist {
                line,
                msg: format!("expected a nonnegative integer for {what}, got {tok:?}"),
            })
        };
        let n = next("n")?;
        let m = next("m")?;
        let max_col = next("max column weight")?;
        let max_row = next("max row weight")?;
        let col_w = (0..n).map(|_| next("column weight")).collect::<Result<Vec<_>>>()?;
        let row_w = (0..m).map(|_| next("row weight")).collect::<Result<Vec<_>>>()?;
        let mut read_lists = |count: usize, width: usize, weights: &[usize], bound: usize, what: &str| -> Result<Vec<Vec<usize>>> {
            let mut lists = Vec::with_capacity(count);
            for (i, &wt) in weights.iter().enumerate().take(count) {
                let mut list = Vec::with_capacity(wt);
                for _ in 0..width.max(wt) {
                    let x = next(what)?;
                    if x == 0 {
                        continue;
                    }
                    if x > bound {
                        return Err(Error::Alist {
                            line: 0,
                            msg: format!("{what} {x} out of range in list {}", i + 1),
                        });
                    }
                    list.push(x - 1);
                }
                if list.len() != wt {
                    return Err(Error::Alist {
                        line: 0,
                        msg: format!("{what} list {} has {} entries, weight says {wt}", i + 1, list.len()),
                    });
                }
                lists.push(list);
            }
            Ok(lists)
        };
        let cols = read_lists(n, max_col, &col_w, m, "row index")?;
        let rows = read_lists(m, max_row, &row_w, n, "column index")?;
        let graph = TannerGraph::from_checks(n, rows)?;
        let mut cols_sorted: Vec<Vec<usize>> = cols;
        for c in &mut cols_sorted {
            c.sort_unstable();
        }
        if cols_sorted != graph.vars {
            return Err(Error::Alist {
                line: 0,
                msg: "column and row lists describe different matrices".into(),
            });
        }
        Ok(graph)
    }

    pub fn save_alist(&self, path: &Path) -> Result<()> {
        self.write_alist(std::io::BufWriter::new(fs::File::create(path)?))
    }

    pub fn load_alist(path: &Path) -> Result<Self> {
        Self::read_alist(fs::File::open(path)?)
    }
}

/// Serialized form; the variable-side adjacency is rebuilt on load.
#[derive(Deserialize)]
struct TannerGraphRepr {
    n: usize,
    checks: Vec<Vec<usize>>,
}

impl TryFrom<TannerGraphRepr> for TannerGraph {
    type Error = Error;
    fn try_from(r: TannerGraphRepr) -> Result<Self> {
        TannerGraph::from_checks(r.n, r.checks)
    }
}

const PEG_ATTEMPTS: u64 = 16;

/// Progressive-edge-growth construction for a degree profile.
pub fn peg_construct(n: usize, profile: &DegreeDistribution, seed: u64) -> Result<TannerGraph> {
    if profile.is_regular() {
        let dv = profile.max_vn_degree();
        let dc = profile.max_cn_degree();
        if (n * dv) % dc != 0 {
            return Err(Error::InfeasibleProfile(format!(
                "{n} variables of degree {dv} give {} edges, not a multiple of {dc}",
                n * dv
            )));
        }
        let m = n * dv / dc;
        return peg_from_degrees(&vec![dv; n], &vec![dc; m], seed);
    }
    let (vn, cn) = profile.degree_sequences(n)?;
    peg_from_degrees(&vn, &cn, seed)
}

/// PEG for explicit degree sequences.
///
/// Variables are processed in ascending degree order. Each new edge goes to a
/// check outside the current breadth-first neighbourhood of the variable (or,
/// once every check is reachable, to one first reached at the deepest level),
/// restricted to checks with spare degree; ties go to the smallest current
/// degree, then to a seeded random rank.
pub fn peg_from_degrees(vn_degrees: &[usize], cn_degrees: &[usize], seed: u64) -> Result<TannerGraph> {
    let n = vn_degrees.len();
    let m = cn_degrees.len();
    let ev: usize = vn_degrees.iter().sum();
    let ec: usize = cn_degrees.iter().sum();
    if ev != ec {
        return Err(Error::InfeasibleProfile(format!("edge counts differ ({ev} vs {ec})")));
    }
    if let Some(&d) = vn_degrees.iter().find(|&&d| d > m) {
        return Err(Error::InfeasibleProfile(format!("variable degree {d} exceeds {m} checks")));
    }
    if let Some(&d) = cn_degrees.iter().find(|&&d| d > n) {
        return Err(Error::InfeasibleProfile(format!("check degree {d} exceeds {n} variables")));
    }
    let mut last = None;
    for attempt in 0..PEG_ATTEMPTS {
        match peg_attempt(vn_degrees, cn_degrees, crate::stream::derive_seed(seed, &[attempt])) {
            Ok(g) => return Ok(g),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn peg_attempt(vn_degrees: &[usize], cn_degrees: &[usize], seed: u64) -> Result<TannerGraph> {
    let n = vn_degrees.len();
    let m = cn_degrees.len();
    let mut rng = stream_rng(seed, &[]);
    let mut rank: Vec<usize> = (0..m).collect();
    rank.shuffle(&mut rng);

    let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (vn_degrees[v], v));

    let mut cn_seen = vec![0u32; m];
    let mut vn_seen = vec![0u32; n];
    let mut stamp = 0u32;
    let mut open_total = cn_degrees.iter().filter(|&&d| d > 0).count();
    let mut frontier: Vec<usize> = Vec::new();
    let mut next_frontier: Vec<usize> = Vec::new();
    let mut candidates: Vec<usize> = Vec::new();

    for &v in &order {
        for _ in 0..vn_degrees[v] {
            let open = |c: usize| chk_adj[c].len() < cn_degrees[c];
            stamp += 1;
            vn_seen[v] = stamp;
            frontier.clear();
            let mut reached_open = 0;
            for &c in &var_adj[v] {
                cn_seen[c] = stamp;
                frontier.push(c);
                reached_open += usize::from(open(c));
            }
            if reached_open == open_total {
                return Err(Error::InfeasibleProfile(format!("no admissible check left for variable {v}")));
            }
            candidates.clear();
            if !var_adj[v].is_empty() {
                loop {
                    next_frontier.clear();
                    let mut newly_open = 0;
                    for &c in &frontier {
                        for &u in &chk_adj[c] {
                            if vn_seen[u] == stamp {
                                continue;
                            }
                            vn_seen[u] = stamp;
                            for &c2 in &var_adj[u] {
                                if cn_seen[c2] != stamp {
                                    cn_seen[c2] = stamp;
                                    next_frontier.push(c2);
                                    newly_open += usize::from(open(c2));
                                }
                            }
                        }
                    }
                    std::mem::swap(&mut frontier, &mut next_frontier);
                    if reached_open + newly_open == open_total {
                        // every open check is now reachable: take those first
                        // reached at this deepest level
                        candidates.extend(frontier.iter().copied().filter(|&c| open(c)));
                        break;
                    }
                    reached_open += newly_open;
                    if frontier.is_empty() {
                        break;
                    }
                }
            }
            if candidates.is_empty() {
                candidates.extend((0..m).filter(|&c| cn_seen[c] != stamp && open(c)));
            }
            let best = candidates
                .iter()
                .copied()
                .min_by_key(|&c| (chk_adj[c].len(), rank[c]))
                .expect("at least one open unreached check");
            var_adj[v].push(best);
            chk_adj[best].push(v);
            if chk_adj[best].len() == cn_degrees[best] {
                open_total -= 1;
            }
        }
    }
    TannerGraph::from_checks(n, chk_adj)
}

/// Length of the shortest cycle, `None` for a forest.
pub fn girth(graph: &TannerGraph) -> Option<usize> {
    let n = graph.n();
    let m = graph.m();
    // nodes 0..n are variables, n..n+m checks
    let neighbours = |x: usize| -> &[usize] {
        if x < n {
            &graph.vars()[x]
        } else {
            &graph.checks()[x - n]
        }
    };
    let offset = |x: usize, y: usize| if x < n { y + n } else { y };
    let mut best = usize::MAX;
    let mut dist = vec![usize::MAX; n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    for s in 0..n {
        for &t in &touched {
            dist[t] = usize::MAX;
            parent[t] = usize::MAX;
        }
        touched.clear();
        queue.clear();
        dist[s] = 0;
        touched.push(s);
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            if 2 * dist[x] + 1 >= best {
                break;
            }
            for &y in neighbours(x) {
                let y = offset(x, y);
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = x;
                    touched.push(y);
                    queue.push_back(y);
                } else if parent[x] != y {
                    best = best.min(dist[x] + dist[y] + 1);
                }
            }
        }
    }
    (best != usize::MAX).then_some(best)
}

/// Generator for the null space of a parity-check matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoder {
    n: usize,
    /// Positions that carry information bits.
    info_positions: Vec<usize>,
    /// Pivot column of each reduced row.
    pivots: Vec<usize>,
    /// Reduced rows restricted to information columns, bit-packed over `n`.
    rows: Vec<Vec<u64>>,
    hash: [u8; 32],
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl Encoder {
    /// Row-reduces `H` over GF(2); dependent rows disappear and `k = n - rank`.
    pub fn build(graph: &TannerGraph) -> Self {
        let n = graph.n();
        let w = words(n);
        let mut rows: Vec<Vec<u64>> = graph
            .checks()
            .iter()
            .map(|c| {
                let mut r = vec![0u64; w];
                for &v in c {
                    r[v / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let (wi, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&r| rows[r][wi] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rows.truncate(rank);
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        for (row, &p) in rows.iter_mut().zip(&pivots) {
            row[p / 64] &= !(1 << (p % 64));
        }
        let info_positions = (0..n).filter(|&c| !is_pivot[c]).collect();
        Encoder {
            n,
            info_positions,
            pivots,
            rows,
            hash: graph.hash(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn effective_rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Codeword with `info` at the information positions.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::InvalidParameter(format!(
                "expected {} information bits, got {}",
                self.k(),
                info.len()
            )));
        }
        let mut word = vec![0u8; self.n];
        let mut packed = vec![0u64; words(self.n)];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            word[pos] = b & 1;
            if b & 1 == 1 {
                packed[pos / 64] |= 1 << (pos % 64);
            }
        }
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let parity = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1;
            word[p] = parity as u8;
        }
        Ok(word)
    }

    /// SHA-256 of the parity-check matrix this encoder was built from.
    pub fn source_hash(&self) -> [u8; 32] {
        self.hash
    }

    const MAGIC: &'static [u8; 8] = b"FDGEN001";

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&self.hash)?;
        for x in [self.n, self.k(), self.rank()] {
            w.write_all(&(x as u64).to_le_bytes())?;
        }
        for &p in &self.pivots {
            w.write_all(&(p as u64).to_le_bytes())?;
        }
        for row in &self.rows {
            for x in row {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Cache("not an encoder sidecar file".into()));
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        let mut u64_buf = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u64_buf)?;
            Ok(u64::from_le_bytes(u64_buf))
        };
        let n = read_u64(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        let rank = read_u64(&mut r)? as usize;
        if k + rank != n {
            return Err(Error::Cache("inconsistent sidecar header".into()));
        }
        let pivots = (0..rank).map(|_| read_u64(&mut r).map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
        let w = words(n);
        let rows = (0..rank)
            .map(|_| (0..w).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            if p >= n {
                return Err(Error::Cache("pivot out of range".into()));
            }
            is_pivot[p] = true;
        }
        Ok(Encoder {
            n,
            info_positions: (0..n).filter(|&c| !is_pivot[c]).collect(),
            pivots,
            rows,
            hash,
        })
    }
}

/// Builds the encoder for `graph`.
pub fn build_encoder(graph: &TannerGraph) -> Encoder {
    Encoder::build(graph)
}

/// Sidecar path for a graph inside `dir`.
pub fn encoder_cache_path(dir: &Path, graph: &TannerGraph) -> PathBuf {
    dir.join(format!("{}.gen", graph.hash_hex()))
}

/// Loads the generator from `dir` when a sidecar for this exact matrix exists,
/// otherwise builds it and writes the sidecar.
pub fn build_encoder_cached(graph: &TannerGraph, dir: &Path) -> Result<Encoder> {
    let path = encoder_cache_path(dir, graph);
    if let Ok(f) = fs::File::open(&path) {
        match Encoder::read_from(std::io::BufReader::new(f)) {
            Ok(e) if e.hash == graph.hash() && e.n == graph.n() => return Ok(e),
            Ok(_) => log::warn!("sidecar {} does not match the matrix, rebuilding", path.display()),
            Err(e) => log::warn!("unreadable sidecar {}: {e}, rebuilding", path.display()),
        }
    }
    let enc = Encoder::build(graph);
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("gen.tmp");
    enc.write_to(std::io::BufWriter::new(fs::File::create(&tmp)?))?;
    fs::rename(&tmp, &path)?;
    Ok(enc)
}
