//! Rate adaptation over a binary symmetric channel: raw point clouds versus
//! persistence diagrams, an abstract t-error-correcting block code, and a
//! feasibility-driven reconfiguration loop.

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Rng};
use crate::series::Series;
use crate::tda::{persistence, vr_filtration, PointCloud};
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

/// Grid side for coordinate and diagram quantisation.
pub const GRID: usize = 64;
/// Raw point clouds travel in a fixed frame of this many bits.
pub const RAW_FRAME_BITS: usize = 6035;
/// Hard cap on an encoded diagram.
pub const PD_MAX_BITS: usize = 4096;
/// Header bits of an encoded diagram (two 8-bit bar counts).
pub const PD_HEADER_BITS: usize = 16;
const RAW_HEADER_BITS: usize = 16;
/// Diagram quantisation step in grid units; the top level marks infinity.
const PD_STEP: f64 = 0.5;
const LANDMARKS: usize = 32;
const VR_MAX: f64 = 40.0;

/// Binary entropy in bits with `f(0) = f(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    /// Crossover probability.
    pub alpha: f64,
    /// Channel uses per slot.
    pub uses: u32,
}

impl Channel {
    pub fn new(alpha: f64, uses: u32) -> Result<Self> {
        if !(0.0..=0.5).contains(&alpha) {
            return Err(invalid(format!("crossover {alpha} outside [0, 0.5]")));
        }
        if uses == 0 {
            return Err(invalid("channel needs at least one use per slot"));
        }
        Ok(Channel { alpha, uses })
    }

    /// Capacity per use, `1 - f(α)`.
    pub fn rate_limit(&self) -> f64 {
        1.0 - binary_entropy(self.alpha)
    }
}

/// `M (1 - f(α))` bits per slot.
pub fn bsc_capacity(ch: &Channel) -> f64 {
    ch.uses as f64 * ch.rate_limit()
}

/// Channel uses needed at `alpha_stress` to keep the capacity available at
/// `alpha_design` with `uses` uses.
pub fn overprovisioned_uses(uses: u32, alpha_design: f64, alpha_stress: f64) -> f64 {
    uses as f64 * (1.0 - binary_entropy(alpha_design)) / (1.0 - binary_entropy(alpha_stress))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockCode {
    pub n: u32,
    pub k: u32,
    pub t_corr: u32,
}

impl BlockCode {
    pub fn new(n: u32, k: u32, t_corr: u32) -> Result<Self> {
        if !(1 <= k && k <= n) {
            return Err(invalid(format!("code needs 1 <= k <= n, got ({n}, {k})")));
        }
        if 2 * t_corr > n - k {
            return Err(invalid(format!("t = {t_corr} exceeds the redundancy of ({n}, {k})")));
        }
        Ok(BlockCode { n, k, t_corr })
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Codewords needed for `bits` information bits.
    pub fn codewords(&self, bits: usize) -> usize {
        bits.div_ceil(self.k as usize)
    }
}

/// `n,k,t_corr` rows with a header line.
pub fn parse_code_table(text: &str) -> Result<Vec<BlockCode>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<u32> {
            rec.get(i)
                .ok_or_else(|| invalid("code table rows need n,k,t_corr"))?
                .parse::<u32>()
                .map_err(|e| invalid(format!("bad code table entry: {e}")))
        };
        out.push(BlockCode::new(num(0)?, num(1)?, num(2)?)?);
    }
    out.sort_by_key(|c| Reverse(c.k));
    Ok(out)
}

/// Built-in (1023, k, t) table, highest rate first.
pub fn code_table() -> Vec<BlockCode> {
    parse_code_table(include_str!("../data/bch1023.csv")).expect("bundled code table is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Raw point cloud (`x = 0`).
    Raw,
    /// Persistence diagram (`x = 1`).
    Diagram,
}

impl Representation {
    pub fn x(self) -> u8 {
        match self {
            Representation::Raw => 0,
            Representation::Diagram => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkConfig {
    pub repr: Representation,
    pub code: BlockCode,
}

/// Memoryless BSC on raw bits; `alpha` may be anywhere in `[0, 1]`.
pub fn bsc_flip<R: rand::Rng + ?Sized>(bits: &[bool], alpha: f64, rng: &mut R) -> Vec<bool> {
    bits.iter().map(|&b| b ^ (rng.random::<f64>() < alpha)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    /// Information bits; erased codewords come back as zeros.
    pub bits: Vec<bool>,
    /// Per-codeword decoding success.
    pub ok: Vec<bool>,
}

/// Per-codeword success flags: a codeword decodes iff its flip count is at
/// most `t_corr`. Flip counts are drawn as Binomial(n, α), the distribution
/// of independent per-bit flips.
pub fn codeword_outcomes<R: rand::Rng + ?Sized>(count: usize, code: BlockCode, alpha: f64, rng: &mut R) -> Vec<bool> {
    if alpha <= 0.0 {
        return vec![true; count];
    }
    let flips = Binomial::new(code.n as u64, alpha.min(1.0)).expect("valid binomial");
    (0..count).map(|_| flips.sample(rng) <= code.t_corr as u64).collect()
}

/// Sends `bits` (padded to whole codewords) through the coded channel.
pub fn transmit<R: rand::Rng + ?Sized>(bits: &[bool], code: BlockCode, alpha: f64, rng: &mut R) -> Received {
    let k = code.k as usize;
    let count = code.codewords(bits.len());
    let ok = codeword_outcomes(count, code, alpha, rng);
    Received { bits: apply_erasures(bits, k, &ok), ok }
}

fn apply_erasures(bits: &[bool], k: usize, ok: &[bool]) -> Vec<bool> {
    let mut out = bits.to_vec();
    for (c, &good) in ok.iter().enumerate() {
        if !good {
            let end = ((c + 1) * k).min(out.len());
            out[c * k..end].iter_mut().for_each(|b| *b = false);
        }
    }
    out
}

/// Canonical prefix code over `GRID` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixCode {
    lengths: Vec<u8>,
    codes: Vec<u32>,
    lookup: HashMap<(u8, u32), u8>,
    max_len: u8,
}

impl PrefixCode {
    /// Huffman code lengths from symbol counts (add-one smoothed), then
    /// canonical codeword assignment.
    pub fn from_counts(counts: &[u64]) -> Self {
        let m = counts.len();
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            counts.iter().enumerate().map(|(s, &c)| Reverse((c + 1, s))).collect();
        // Node ids >= m are internal; children[id - m] = (left, right).
        let mut children: Vec<(usize, usize)> = Vec::new();
        while heap.len() > 1 {
            let Reverse((wa, a)) = heap.pop().expect("non-empty heap");
            let Reverse((wb, b)) = heap.pop().expect("non-empty heap");
            children.push((a, b));
            heap.push(Reverse((wa + wb, m + children.len() - 1)));
        }
        let mut lengths = vec![0u8; m];
        if m == 1 {
            lengths[0] = 1;
        } else {
            let mut stack = vec![(m + children.len() - 1, 0u8)];
            while let Some((node, depth)) = stack.pop() {
                if node < m {
                    lengths[node] = depth;
                } else {
                    let (l, r) = children[node - m];
                    stack.push((l, depth + 1));
                    stack.push((r, depth + 1));
                }
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&s| (lengths[s], s));
        let mut codes = vec![0u32; m];
        let mut lookup = HashMap::new();
        let mut code = 0u32;
        let mut prev = lengths[order[0]];
        for (i, &s) in order.iter().enumerate() {
            if i > 0 {
                code = (code + 1) << (lengths[s] - prev);
            }
            prev = lengths[s];
            codes[s] = code;
            lookup.insert((lengths[s], code), s as u8);
        }
        let max_len = *lengths.iter().max().unwrap_or(&1);
        PrefixCode { lengths, codes, lookup, max_len }
    }

    pub fn length(&self, sym: u8) -> u8 {
        self.lengths[sym as usize]
    }

    pub fn encode(&self, sym: u8, out: &mut Vec<bool>) {
        let (len, code) = (self.lengths[sym as usize], self.codes[sym as usize]);
        for i in (0..len).rev() {
            out.push((code >> i) & 1 == 1);
        }
    }

    /// Decodes one symbol at `*pos`; `None` when the stream runs out.
    pub fn decode(&self, bits: &[bool], pos: &mut usize) -> Option<u8> {
        let mut code = 0u32;
        for len in 1..=self.max_len {
            let b = *bits.get(*pos)?;
            *pos += 1;
            code = (code << 1) | b as u32;
            if let Some(&s) = self.lookup.get(&(len, code)) {
                return Some(s);
            }
        }
        None
    }
}

fn push_uint(v: usize, width: usize, out: &mut Vec<bool>) {
    for i in (0..width).rev() {
        out.push((v >> i) & 1 == 1);
    }
}

fn read_uint(bits: &[bool], pos: &mut usize, width: usize) -> Option<usize> {
    let mut v = 0usize;
    for _ in 0..width {
        v = (v << 1) | *bits.get(*pos)? as usize;
        *pos += 1;
    }
    Some(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    TwoLoops,
    OneLoop,
    NoLoop,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 3] = [ShapeClass::TwoLoops, ShapeClass::OneLoop, ShapeClass::NoLoop];

    pub fn label(self) -> usize {
        self as usize
    }
}

/// A labelled object quantised onto the `GRID × GRID` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeObject {
    pub label: usize,
    /// Sorted, de-duplicated grid cells.
    pub points: Vec<(u8, u8)>,
}

fn quantise(x: f64) -> u8 {
    x.round().clamp(0.0, (GRID - 1) as f64) as u8
}

/// Synthetic stand-in for thresholded digit images: rings for loops and
/// filled blobs or strokes for loop-free shapes.
pub fn generate_object(class: ShapeClass, rng: &mut Rng) -> ShapeObject {
    let noise = Normal::new(0.0, 0.8).expect("valid normal");
    let count = rng.random_range(260..380);
    let mut pts = Vec::with_capacity(count);
    let ring = |cx: f64, cy: f64, r: f64, n: usize, rng: &mut Rng, pts: &mut Vec<(u8, u8)>| {
        for _ in 0..n {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let rr = r + noise.sample(rng);
            pts.push((quantise(cx + rr * a.cos()), quantise(cy + rr * a.sin())));
        }
    };
    let (cx, cy) = (rng.random_range(28.0..36.0), rng.random_range(28.0..36.0));
    match class {
        ShapeClass::OneLoop => {
            let r = rng.random_range(14.0..20.0);
            ring(cx, cy, r, count, rng, &mut pts);
        }
        ShapeClass::TwoLoops => {
            let r = rng.random_range(8.0..11.0);
            let gap = r + rng.random_range(0.5..2.0);
            ring(cx, cy - gap, r, count / 2, rng, &mut pts);
            ring(cx, cy + gap, r, count - count / 2, rng, &mut pts);
        }
        ShapeClass::NoLoop => {
            if rng.random_bool(0.5) {
                let (rx, ry) = (rng.random_range(6.0..11.0), rng.random_range(6.0..11.0));
                for _ in 0..count {
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    let s = rng.random::<f64>().sqrt();
                    pts.push((quantise(cx + rx * s * a.cos()), quantise(cy + ry * s * a.sin())));
                }
            } else {
                let a = rng.random_range(0.0..std::f64::consts::PI);
                let half = rng.random_range(14.0..24.0);
                for _ in 0..count {
                    let s = rng.random_range(-half..half);
                    let w = rng.random_range(-2.0..2.0);
                    pts.push((quantise(cx + s * a.cos() - w * a.sin()), quantise(cy + s * a.sin() + w * a.cos())));
                }
            }
        }
    }
    pts.sort_unstable();
    pts.dedup();
    ShapeObject { label: class.label(), points: pts }
}

/// Quantised persistence diagram: `(birth, death)` levels, `GRID - 1` = ∞.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuantDiagram {
    pub h0: Vec<(u8, u8)>,
    pub h1: Vec<(u8, u8)>,
}

fn pd_level(v: f64) -> u8 {
    if v.is_infinite() {
        (GRID - 1) as u8
    } else {
        (v / PD_STEP).round().min((GRID - 2) as f64) as u8
    }
}

fn farthest_point_landmarks(points: &[(u8, u8)], m: usize) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let p: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let mut chosen = vec![0usize];
    let mut dist: Vec<f64> = p.iter().map(|q| (q.0 - p[0].0).hypot(q.1 - p[0].1)).collect();
    while chosen.len() < m.min(p.len()) {
        let (far, &d) = dist.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).expect("non-empty");
        if d == 0.0 {
            break;
        }
        chosen.push(far);
        for (i, q) in p.iter().enumerate() {
            dist[i] = dist[i].min((q.0 - p[far].0).hypot(q.1 - p[far].1));
        }
    }
    chosen.iter().map(|&i| vec![p[i].0, p[i].1]).collect()
}

/// Diagram of a landmark subsample, quantised; zero-length bars dropped.
pub fn object_diagram(points: &[(u8, u8)]) -> QuantDiagram {
    let lm = farthest_point_landmarks(points, LANDMARKS);
    if lm.is_empty() {
        return QuantDiagram::default();
    }
    let cloud = PointCloud::new(lm).expect("finite landmarks");
    let pd = persistence(&vr_filtration(&cloud, VR_MAX)).expect("VR filtration is valid");
    let q = |bars: &[(f64, f64)]| -> Vec<(u8, u8)> {
        bars.iter().map(|&(b, d)| (pd_level(b), pd_level(d))).filter(|(b, d)| d > b).collect()
    };
    QuantDiagram { h0: q(&pd.h0), h1: q(&pd.h1) }
}

pub const FEATURES: usize = 8;

/// Fixed 8-dimensional summary of a quantised diagram.
pub fn diagram_features(d: &QuantDiagram) -> [f64; FEATURES] {
    let val = |l: u8| if l as usize == GRID - 1 { VR_MAX } else { l as f64 * PD_STEP };
    let mut h1: Vec<f64> = d.h1.iter().map(|&(b, e)| val(e) - val(b)).collect();
    h1.sort_by(|a, b| b.total_cmp(a));
    let h0: Vec<f64> = d.h0.iter().filter(|b| (b.1 as usize) < GRID - 1).map(|&(b, e)| val(e) - val(b)).collect();
    let mean0 = if h0.is_empty() { 0.0 } else { h0.iter().sum::<f64>() / h0.len() as f64 };
    [
        h1.first().copied().unwrap_or(0.0),
        h1.get(1).copied().unwrap_or(0.0),
        h1.iter().filter(|&&p| p > 2.0).count() as f64,
        h1.iter().sum(),
        h0.iter().filter(|&&p| p > 4.0).count() as f64,
        h0.iter().copied().fold(0.0, f64::max),
        mean0,
        d.h0.len() as f64,
    ]
}

/// Nearest-centroid classifier on standardised features.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidClassifier {
    mean: [f64; FEATURES],
    scale: [f64; FEATURES],
    centroids: Vec<[f64; FEATURES]>,
}

impl CentroidClassifier {
    pub fn fit(samples: &[([f64; FEATURES], usize)], classes: usize) -> Self {
        let n = samples.len() as f64;
        let mut mean = [0.0; FEATURES];
        let mut scale = [0.0; FEATURES];
        for (f, _) in samples {
            for j in 0..FEATURES {
                mean[j] += f[j] / n;
            }
        }
        for (f, _) in samples {
            for j in 0..FEATURES {
                scale[j] += (f[j] - mean[j]).powi(2) / n;
            }
        }
        scale.iter_mut().for_each(|s| *s = s.sqrt().max(1e-6));
        let mut centroids = vec![[0.0; FEATURES]; classes];
        let mut counts = vec![0.0; classes];
        for (f, c) in samples {
            counts[*c] += 1.0;
            for j in 0..FEATURES {
                centroids[*c][j] += (f[j] - mean[j]) / scale[j];
            }
        }
        for (c, cnt) in centroids.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|x| *x /= f64::max(*cnt, 1.0));
        }
        CentroidClassifier { mean, scale, centroids }
    }

    pub fn predict(&self, f: &[f64; FEATURES]) -> usize {
        let z: Vec<f64> = (0..FEATURES).map(|j| (f[j] - self.mean[j]) / self.scale[j]).collect();
        let dist = |c: &[f64; FEATURES]| c.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (0..self.centroids.len())
            .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])).then(a.cmp(&b)))
            .expect("at least one class")
    }
}

struct Prepared {
    label: usize,
    raw_bits: Vec<bool>,
    pd_bits: Vec<bool>,
    clean: [f64; FEATURES],
}

/// Everything fixed before an experiment: codebooks, classifier and corpora.
pub struct LinkSystem {
    raw_code: PrefixCode,
    pd_code: PrefixCode,
    classifier: CentroidClassifier,
    train: Vec<Prepared>,
    test: Vec<Prepared>,
    cache: HashMap<(bool, usize, u32, Vec<bool>), usize>,
}

impl LinkSystem {
    pub fn new(seed: u64, train_per_class: usize, test_per_class: usize) -> Result<Self> {
        let mut rng = stream(seed, "ratelink/corpus");
        let make = |n: usize, rng: &mut Rng| -> Vec<ShapeObject> {
            (0..n).flat_map(|_| ShapeClass::ALL).map(|c| generate_object(c, rng)).collect::<Vec<_>>()
        };
        let train_objs = make(train_per_class, &mut rng);
        let test_objs = make(test_per_class, &mut rng);
        let train_pd: Vec<QuantDiagram> = train_objs.iter().map(|o| object_diagram(&o.points)).collect();
        let mut raw_counts = vec![0u64; GRID];
        let mut pd_counts = vec![0u64; GRID];
        for (o, d) in train_objs.iter().zip(&train_pd) {
            for &(x, y) in &o.points {
                raw_counts[x as usize] += 1;
                raw_counts[y as usize] += 1;
            }
            for &(b, e) in d.h0.iter().chain(&d.h1) {
                pd_counts[b as usize] += 1;
                pd_counts[e as usize] += 1;
            }
        }
        let raw_code = PrefixCode::from_counts(&raw_counts);
        let pd_code = PrefixCode::from_counts(&pd_counts);
        let feats: Vec<([f64; FEATURES], usize)> =
            train_pd.iter().zip(&train_objs).map(|(d, o)| (diagram_features(d), o.label)).collect();
        let classifier = CentroidClassifier::fit(&feats, ShapeClass::ALL.len());
        let mut sys = LinkSystem { raw_code, pd_code, classifier, train: Vec::new(), test: Vec::new(), cache: HashMap::new() };
        let prep = |sys: &LinkSystem, o: &ShapeObject, d: QuantDiagram| -> Result<Prepared> {
            Ok(Prepared {
                label: o.label,
                raw_bits: sys.encode_raw(&o.points)?,
                pd_bits: sys.encode_diagram(&d)?,
                clean: diagram_features(&d),
            })
        };
        let train = train_objs.iter().zip(train_pd).map(|(o, d)| prep(&sys, o, d)).collect::<Result<Vec<_>>>()?;
        let test = test_objs.iter().map(|o| prep(&sys, o, object_diagram(&o.points))).collect::<Result<Vec<_>>>()?;
        sys.train = train;
        sys.test = test;
        Ok(sys)
    }

    /// Raw frame: 16-bit point count, coded coordinates, zero padding.
    pub fn encode_raw(&self, points: &[(u8, u8)]) -> Result<Vec<bool>> {
        let mut out = Vec::with_capacity(RAW_FRAME_BITS);
        push_uint(points.len(), RAW_HEADER_BITS, &mut out);
        for &(x, y) in points {
            self.raw_code.encode(x, &mut out);
            self.raw_code.encode(y, &mut out);
        }
        if out.len() > RAW_FRAME_BITS {
            return Err(invalid(format!("raw payload {} bits exceeds the {RAW_FRAME_BITS}-bit frame", out.len())));
        }
        out.resize(RAW_FRAME_BITS, false);
        Ok(out)
    }

    /// Diagram stream: 8-bit H0 and H1 bar counts, then coded levels.
    pub fn encode_diagram(&self, d: &QuantDiagram) -> Result<Vec<bool>> {
        if d.h0.len() > 255 || d.h1.len() > 255 {
            return Err(invalid("too many bars for the diagram header"));
        }
        let mut out = Vec::new();
        push_uint(d.h0.len(), 8, &mut out);
        push_uint(d.h1.len(), 8, &mut out);
        for &(b, e) in d.h0.iter().chain(&d.h1) {
            self.pd_code.encode(b, &mut out);
            self.pd_code.encode(e, &mut out);
        }
        if out.len() > PD_MAX_BITS {
            return Err(invalid(format!("diagram payload {} bits exceeds cap {PD_MAX_BITS}", out.len())));
        }
        Ok(out)
    }

    pub fn decode_raw(&self, bits: &[bool]) -> Vec<(u8, u8)> {
        let mut pos = 0;
        let count = read_uint(bits, &mut pos, RAW_HEADER_BITS).unwrap_or(0);
        let mut pts = Vec::new();
        for _ in 0..count {
            let (Some(x), Some(y)) = (self.raw_code.decode(bits, &mut pos), self.raw_code.decode(bits, &mut pos)) else {
                break;
            };
            pts.push((x, y));
        }
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    pub fn decode_diagram(&self, bits: &[bool]) -> QuantDiagram {
        let mut pos = 0;
        let n0 = read_uint(bits, &mut pos, 8).unwrap_or(0);
        let n1 = read_uint(bits, &mut pos, 8).unwrap_or(0);
        let read = |n: usize, pos: &mut usize| -> Vec<(u8, u8)> {
            let mut v = Vec::new();
            for _ in 0..n {
                match (self.pd_code.decode(bits, pos), self.pd_code.decode(bits, pos)) {
                    (Some(b), Some(e)) => v.push((b, e)),
                    _ => break,
                }
            }
            v
        };
        let h0 = read(n0, &mut pos);
        let h1 = read(n1, &mut pos);
        QuantDiagram { h0, h1 }
    }

    fn corpus(&self, test: bool) -> &[Prepared] {
        if test {
            &self.test
        } else {
            &self.train
        }
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    /// Mean source bits per representation over the training corpus.
    pub fn mean_source_bits(&self, repr: Representation) -> f64 {
        let sum: usize = self.train.iter().map(|p| self.bits_of(p, repr).len()).sum();
        sum as f64 / self.train.len() as f64
    }

    fn bits_of<'a>(&self, p: &'a Prepared, repr: Representation) -> &'a [bool] {
        match repr {
            Representation::Raw => &p.raw_bits,
            Representation::Diagram => &p.pd_bits,
        }
    }

    /// Source bits for corpus object `idx`.
    pub fn encoded(&self, test: bool, idx: usize, repr: Representation) -> &[bool] {
        self.bits_of(&self.corpus(test)[idx], repr)
    }

    pub fn label(&self, test: bool, idx: usize) -> usize {
        self.corpus(test)[idx].label
    }

    /// Predicted label after transmission with the given codeword outcomes.
    pub fn classify_received(&mut self, test: bool, idx: usize, cfg: LinkConfig, ok: &[bool]) -> usize {
        let p = &self.corpus(test)[idx];
        if ok.iter().all(|&g| g) {
            return self.classifier.predict(&p.clean);
        }
        let key = (test, idx, cfg.code.k, ok.to_vec());
        if let Some(&c) = self.cache.get(&key) {
            return c;
        }
        let bits = apply_erasures(self.bits_of(p, cfg.repr), cfg.code.k as usize, ok);
        let diagram = match cfg.repr {
            Representation::Raw => object_diagram(&self.decode_raw(&bits)),
            Representation::Diagram => self.decode_diagram(&bits),
        };
        let c = self.classifier.predict(&diagram_features(&diagram));
        self.cache.insert(key, c);
        c
    }

    /// One transmission of object `idx`; returns whether it was classified correctly.
    pub fn trial<R: rand::Rng + ?Sized>(&mut self, test: bool, idx: usize, cfg: LinkConfig, alpha: f64, rng: &mut R) -> bool {
        let count = cfg.code.codewords(self.encoded(test, idx, cfg.repr).len());
        let ok = codeword_outcomes(count, cfg.code, alpha, rng);
        self.classify_received(test, idx, cfg, &ok) == self.label(test, idx)
    }

    /// Monte-Carlo accuracy on the training corpus for every configuration
    /// that meets the delay and rate constraints; others get accuracy 0.
    pub fn accuracy_table<R: rand::Rng + ?Sized>(
        &mut self,
        channel: &Channel,
        codes: &[BlockCode],
        reps: usize,
        rng: &mut R,
    ) -> AccuracyTable {
        let mut entries = Vec::new();
        for repr in [Representation::Raw, Representation::Diagram] {
            let bits = self.mean_source_bits(repr);
            for &code in codes {
                let cfg = LinkConfig { repr, code };
                let mut entry = TableEntry { config: cfg, mean_source_bits: bits, accuracy: 0.0 };
                if meets_delay_and_rate(channel, &entry) {
                    let mut hits = 0usize;
                    for _ in 0..reps {
                        for i in 0..self.train.len() {
                            hits += self.trial(false, i, cfg, channel.alpha, rng) as usize;
                        }
                    }
                    entry.accuracy = hits as f64 / (reps * self.train.len()) as f64;
                }
                entries.push(entry);
            }
        }
        AccuracyTable { entries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub config: LinkConfig,
    pub mean_source_bits: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub entries: Vec<TableEntry>,
}

fn meets_delay_and_rate(ch: &Channel, e: &TableEntry) -> bool {
    let code = e.config.code;
    let coded = e.mean_source_bits * code.n as f64 / code.k as f64;
    coded <= ch.uses as f64 * (1.0 + 1e-12) && code.rate() <= ch.rate_limit() + 1e-12
}

/// Configurations meeting the delay, rate and accuracy constraints, in table order.
pub fn feasible_configs(channel: &Channel, beta: f64, table: &AccuracyTable) -> Vec<LinkConfig> {
    table
        .entries
        .iter()
        .filter(|e| meets_delay_and_rate(channel, e) && e.accuracy >= beta)
        .map(|e| e.config)
        .collect()
}

/// Preferred configuration: raw first, then the highest code rate.
pub fn preferred(configs: &[LinkConfig]) -> Option<LinkConfig> {
    configs.iter().copied().min_by_key(|c| (c.repr, Reverse(c.code.k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateLinkParams {
    pub steps: usize,
    pub uses: u32,
    pub beta: f64,
    /// Objects classified per step.
    pub batch: usize,
    /// Trailing window for failure detection.
    pub window: usize,
    pub alpha_low: f64,
    pub alpha_high: f64,
    pub ramp_start: usize,
    pub ramp_end: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Monte-Carlo passes over the training corpus per accuracy table.
    pub table_reps: usize,
    /// Crossover the robust link is provisioned for; its configuration is
    /// fixed from feasibility at this value.
    pub robust_design_alpha: f64,
}

impl Default for RateLinkParams {
    fn default() -> Self {
        RateLinkParams {
            steps: 1000,
            uses: 6035,
            beta: 0.7,
            batch: 16,
            window: 20,
            alpha_low: 0.0,
            alpha_high: 0.1,
            ramp_start: 250,
            ramp_end: 400,
            train_per_class: 20,
            test_per_class: 40,
            table_reps: 2,
            robust_design_alpha: 0.0,
        }
    }
}

impl RateLinkParams {
    pub fn alpha_at(&self, t: usize) -> f64 {
        if t <= self.ramp_start {
            self.alpha_low
        } else if t >= self.ramp_end {
            self.alpha_high
        } else {
            let f = (t - self.ramp_start) as f64 / (self.ramp_end - self.ramp_start) as f64;
            self.alpha_low + f * (self.alpha_high - self.alpha_low)
        }
    }

    pub fn validate(&self) -> Result<()> {
        Channel::new(self.alpha_low, self.uses)?;
        Channel::new(self.alpha_high, self.uses)?;
        Channel::new(self.robust_design_alpha, self.uses)?;
        if self.steps == 0 || self.batch == 0 || self.window == 0 || self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(invalid("ratelink counts must be positive"));
        }
        if self.ramp_end < self.ramp_start {
            return Err(invalid("ramp_end must not precede ramp_start"));
        }
        Ok(())
    }
}

/// Robust link (fixed initial configuration) against the resilient link
/// (detect, re-solve feasibility, then walk down the code table).
pub fn run_ratelink(params: &RateLinkParams, seed: u64) -> Result<Series> {
    params.validate()?;
    let mut sys = LinkSystem::new(seed, params.train_per_class, params.test_per_class)?;
    let codes = code_table();
    let mut draw_rng = stream(seed, "ratelink/objects");
    let mut robust_rng = stream(seed, "ratelink/channel/robust");
    let mut resilient_rng = stream(seed, "ratelink/channel/resilient");
    let mut pilot_rng = stream(seed, "ratelink/pilot");
    let mut table_rng = stream(seed, "ratelink/table");

    let ch0 = Channel::new(params.alpha_at(0), params.uses)?;
    let table0 = sys.accuracy_table(&ch0, &codes, params.table_reps, &mut table_rng);
    let initial = preferred(&feasible_configs(&ch0, params.beta, &table0))
        .ok_or_else(|| Error::Infeasible("no initial link configuration".into()))?;
    let robust = if params.robust_design_alpha == ch0.alpha {
        initial
    } else {
        let ch = Channel::new(params.robust_design_alpha, params.uses)?;
        let table = sys.accuracy_table(&ch, &codes, params.table_reps, &mut table_rng);
        preferred(&feasible_configs(&ch, params.beta, &table))
            .ok_or_else(|| Error::Infeasible("no robust link configuration at the design crossover".into()))?
    };
    let mut current = initial;
    let mut history: Vec<f64> = Vec::new();
    let mut pilot: Vec<f64> = Vec::new();
    let mut since_change = 0usize;
    let pilot_code = BlockCode { n: 1023, k: 1023, t_corr: 0 };
    let pilot_flips = |alpha: f64, rng: &mut Rng| -> f64 {
        if alpha <= 0.0 {
            0.0
        } else {
            Binomial::new(pilot_code.n as u64, alpha).expect("valid binomial").sample(rng) as f64 / pilot_code.n as f64
        }
    };

    let mut out = Series::new(&["t", "accuracy_robust", "accuracy_resilient", "alpha", "config_x", "config_k"]);
    for t in 0..params.steps {
        let alpha = params.alpha_at(t);
        let objs: Vec<usize> = (0..params.batch).map(|_| draw_rng.random_range(0..sys.test_len())).collect();
        let hits_rob = objs.iter().filter(|&&i| sys.trial(true, i, robust, alpha, &mut robust_rng)).count();
        let hits_res = objs.iter().filter(|&&i| sys.trial(true, i, current, alpha, &mut resilient_rng)).count();
        let acc_rob = hits_rob as f64 / params.batch as f64;
        let acc_res = hits_res as f64 / params.batch as f64;
        out.push(vec![t as f64, acc_rob, acc_res, alpha, current.repr.x() as f64, current.code.k as f64]);

        history.push(acc_res);
        pilot.push(pilot_flips(alpha, &mut pilot_rng));
        since_change += 1;
        let w = params.window;
        if since_change >= w && history.len() >= w {
            let trailing = history[history.len() - w..].iter().sum::<f64>() / w as f64;
            if trailing < params.beta {
                let alpha_hat = (pilot[pilot.len() - w..].iter().sum::<f64>() / w as f64).min(0.5);
                let ch = Channel::new(alpha_hat, params.uses)?;
                let table = sys.accuracy_table(&ch, &codes, params.table_reps, &mut table_rng);
                let feasible = feasible_configs(&ch, params.beta, &table);
                let next = match preferred(&feasible) {
                    Some(c) if c != current && !(c.repr == current.repr && c.code.k >= current.code.k) => c,
                    _ => walk_down(&ch, &table, current, &codes),
                };
                if next != current {
                    current = next;
                    since_change = 0;
                }
            }
        }
    }
    Ok(out)
}

/// Next stronger code for the current representation that still meets the
/// delay and rate constraints; switches to diagrams when raw has none left.
fn walk_down(ch: &Channel, table: &AccuracyTable, current: LinkConfig, codes: &[BlockCode]) -> LinkConfig {
    let usable = |repr: Representation, below: u32| {
        table
            .entries
            .iter()
            .filter(|e| e.config.repr == repr && e.config.code.k < below && meets_delay_and_rate(ch, e))
            .map(|e| e.config)
            .max_by_key(|c| c.code.k)
    };
    usable(current.repr, current.code.k)
        .or_else(|| if current.repr == Representation::Raw { usable(Representation::Diagram, u32::MAX) } else { None })
        .unwrap_or(LinkConfig {
            repr: Representation::Diagram,
            code: *codes.iter().min_by_key(|c| c.k).expect("non-empty code table"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial as BinomialDist, DiscreteCDF};

    #[test]
    fn capacity_values() {
        assert_eq!(bsc_capacity(&Channel::new(0.0, 6035).unwrap()), 6035.0);
        assert_eq!(bsc_capacity(&Channel::new(0.5, 6035).unwrap()), 0.0);
        assert!((bsc_capacity(&Channel::new(0.1, 6035).unwrap()) - 3205.0).abs() <= 1.0);
        assert!((bsc_capacity(&Channel::new(0.01, 6035).unwrap()) - 5548.0).abs() <= 1.0);
        assert!(Channel::new(0.6, 10).is_err());
    }

    #[test]
    fn overprovisioning_matches_capacity_argument() {
        assert!((overprovisioned_uses(6035, 0.01, 0.1) - 10447.0).abs() <= 1.0);
    }

    #[test]
    fn table_is_valid_and_sorted() {
        let t = code_table();
        assert_eq!(t[0], BlockCode { n: 1023, k: 1023, t_corr: 0 });
        assert!(t.windows(2).all(|w| w[0].k > w[1].k));
        for k in [1013, 248, 183, 121] {
            assert!(t.iter().any(|c| c.k == k));
        }
        assert!(BlockCode::new(1023, 1013, 6).is_err());
    }

    #[test]
    fn noiseless_channel_decodes_everything() {
        let mut rng = stream(1, "t");
        let bits: Vec<bool> = (0..3000).map(|i| i % 3 == 0).collect();
        let code = BlockCode::new(1023, 1013, 1).unwrap();
        let rx = transmit(&bits, code, 0.0, &mut rng);
        assert!(rx.ok.iter().all(|&g| g));
        assert_eq!(rx.bits, bits);
        assert_eq!(bsc_flip(&bits, 1.0, &mut rng), bits.iter().map(|b| !b).collect::<Vec<_>>());
    }

    #[test]
    fn failure_rate_matches_binomial_tail() {
        let code = BlockCode::new(1023, 973, 5).unwrap();
        let n = 400_000;
        let mut rng = stream(2, "tail");
        let fails = codeword_outcomes(n, code, 0.001, &mut rng).iter().filter(|&&g| !g).count() as f64;
        let p = 1.0 - BinomialDist::new(0.001, 1023).unwrap().cdf(5);
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((fails - n as f64 * p).abs() < 4.0 * sd, "{fails} vs {}", n as f64 * p);
    }

    #[test]
    fn per_bit_flips_match_count_model() {
        // Counting flips from the literal BSC reproduces the same failure rate.
        let code = BlockCode::new(63, 45, 3).unwrap();
        let mut rng = stream(3, "bits");
        let zeros = vec![false; 63];
        let trials = 20_000;
        let direct = (0..trials)
            .filter(|_| bsc_flip(&zeros, 0.05, &mut rng).iter().filter(|&&b| b).count() as u32 > code.t_corr)
            .count() as f64;
        let model = codeword_outcomes(trials, code, 0.05, &mut rng).iter().filter(|&&g| !g).count() as f64;
        let p = 1.0 - BinomialDist::new(0.05, 63).unwrap().cdf(3);
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((direct - model).abs() < 6.0 * sd);
    }

    #[test]
    fn lower_alpha_never_hurts() {
        let code = BlockCode::new(1023, 248, 109).unwrap();
        let rate = |a: f64| {
            let mut rng = stream(4, "mono");
            codeword_outcomes(20_000, code, a, &mut rng).iter().filter(|&&g| g).count()
        };
        let r: Vec<usize> = [0.12, 0.1, 0.08, 0.05].iter().map(|&a| rate(a)).collect();
        assert!(r.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    }

    #[test]
    fn prefix_code_roundtrip() {
        let counts: Vec<u64> = (0..GRID as u64).map(|i| (i * 7919) % 97).collect();
        let code = PrefixCode::from_counts(&counts);
        let syms: Vec<u8> = (0..500).map(|i| ((i * 31) % GRID) as u8).collect();
        let mut bits = Vec::new();
        for &s in &syms {
            code.encode(s, &mut bits);
        }
        let mut pos = 0;
        let back: Vec<u8> = (0..syms.len()).map(|_| code.decode(&bits, &mut pos).unwrap()).collect();
        assert_eq!(back, syms);
        // Kraft equality for a full binary tree.
        let kraft: f64 = (0..GRID).map(|s| 0.5f64.powi(code.length(s as u8) as i32)).sum();
        assert!((kraft - 1.0).abs() < 1e-12);
    }

    fn small_system() -> LinkSystem {
        LinkSystem::new(7, 6, 6).unwrap()
    }

    #[test]
    fn encoding_properties() {
        let sys = small_system();
        let empty = sys.encode_diagram(&QuantDiagram::default()).unwrap();
        assert_eq!(empty.len(), PD_HEADER_BITS);
        for test in [false, true] {
            let n = if test { sys.test_len() } else { sys.train_len() };
            for i in 0..n {
                let raw = sys.encoded(test, i, Representation::Raw);
                let pd = sys.encoded(test, i, Representation::Diagram);
                assert_eq!(raw.len(), RAW_FRAME_BITS);
                assert!(pd.len() < raw.len());
            }
        }
        let again = small_system();
        assert_eq!(sys.encoded(true, 3, Representation::Diagram), again.encoded(true, 3, Representation::Diagram));
        let too_many = vec![(0u8, 0u8); 3000];
        assert!(sys.encode_raw(&too_many).is_err());
    }

    #[test]
    fn decode_inverts_encode() {
        let sys = small_system();
        let mut rng = stream(5, "obj");
        let obj = generate_object(ShapeClass::OneLoop, &mut rng);
        assert_eq!(sys.decode_raw(&sys.encode_raw(&obj.points).unwrap()), obj.points);
        let d = object_diagram(&obj.points);
        assert_eq!(sys.decode_diagram(&sys.encode_diagram(&d).unwrap()), d);
    }

    #[test]
    fn shapes_have_expected_loops() {
        let mut rng = stream(6, "shapes");
        for _ in 0..5 {
            let one = diagram_features(&object_diagram(&generate_object(ShapeClass::OneLoop, &mut rng).points));
            let two = diagram_features(&object_diagram(&generate_object(ShapeClass::TwoLoops, &mut rng).points));
            let none = diagram_features(&object_diagram(&generate_object(ShapeClass::NoLoop, &mut rng).points));
            assert!(one[0] > 10.0 && one[1] < 5.0, "{one:?}");
            assert!(two[1] > 5.0, "{two:?}");
            assert!(none[0] < 5.0, "{none:?}");
        }
    }

    #[test]
    fn feasibility_examples() {
        let mut sys = small_system();
        let codes = code_table();
        let mut rng = stream(8, "table");
        let clean = Channel::new(0.0, 6035).unwrap();
        let table = sys.accuracy_table(&clean, &codes, 1, &mut rng);
        let feas = feasible_configs(&clean, 0.7, &table);
        assert_eq!(preferred(&feas).unwrap(), LinkConfig { repr: Representation::Raw, code: codes[0] });
        let all = feasible_configs(&clean, 0.0, &table);
        let raw_bits = sys.mean_source_bits(Representation::Raw);
        for e in &table.entries {
            let fits = e.mean_source_bits * e.config.code.n as f64 / e.config.code.k as f64 <= 6035.0;
            assert_eq!(all.contains(&e.config), fits);
        }
        let noisy = Channel::new(0.1, 6035).unwrap();
        let table = sys.accuracy_table(&noisy, &codes, 1, &mut rng);
        let feas = feasible_configs(&noisy, 0.7, &table);
        assert!(feas.iter().all(|c| c.repr == Representation::Diagram));
        // Even the rate-0.99 code pushes a raw frame past M.
        assert!(raw_bits * 1023.0 / 1013.0 > 6035.0);
        for beta in [0.0, 0.5, 0.7, 0.9] {
            let hi = feasible_configs(&noisy, beta + 0.05, &table);
            let lo = feasible_configs(&noisy, beta, &table);
            assert!(hi.iter().all(|c| lo.contains(c)));
        }
    }

    #[test]
    fn constant_clean_channel_is_flat() {
        let p = RateLinkParams { steps: 60, alpha_high: 0.0, test_per_class: 8, train_per_class: 8, ..Default::default() };
        let s = run_ratelink(&p, 1).unwrap();
        let rob = s.column("accuracy_robust").unwrap();
        let res = s.column("accuracy_resilient").unwrap();
        assert_eq!(rob, res);
        assert!(s.column("config_k").unwrap().iter().all(|&k| k == 1023.0));
    }
}
