//! Binary symbolic dynamics for the doubling map: torus points, dyadic
//! cylinders, the words cut out around the singularity, and the de Bruijn
//! graph of the resulting subshift of finite type.
//!
//! A word `w_1 ... w_n` is packed into the integer whose binary digits are
//! `w_1 ... w_n` (most significant first), so its cylinder is the interval
//! `[k/2^n, (k+1)/2^n)` and the shift acts on states as `k -> (2k + b) mod 2^n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported word length.
pub const MAX_DEPTH: u32 = 30;

/// Largest power of two allowed in an exact dyadic denominator (keeps the
/// floating value exact).
pub const MAX_DYADIC_LOG2: u32 = 53;

/// Exact dyadic rational `numerator / 2^log2_denominator`, normalized so the
/// numerator is odd (or the whole thing is `0/2^0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    pub numerator: u64,
    pub log2_denominator: u32,
}

impl Dyadic {
    pub fn new(numerator: u64, log2_denominator: u32) -> Result<Self> {
        if log2_denominator > 63 || (log2_denominator < 64 && numerator >> log2_denominator != 0)
        {
            return Err(Error::InvalidArgument(format!(
                "dyadic {numerator}/2^{log2_denominator} is not in [0, 1)"
            )));
        }
        let (mut num, mut l) = (numerator, log2_denominator);
        if num == 0 {
            l = 0;
        }
        while l > 0 && num % 2 == 0 {
            num /= 2;
            l -= 1;
        }
        if l > MAX_DYADIC_LOG2 {
            return Err(Error::InvalidArgument(format!(
                "dyadic denominator 2^{l} exceeds 2^{MAX_DYADIC_LOG2}"
            )));
        }
        Ok(Dyadic { numerator: num, log2_denominator: l })
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (self.log2_denominator as f64).exp2()
    }

    /// `self - other` reduced to `[-1/2, 1/2)`, computed exactly.
    pub fn signed_difference(self, other: Dyadic) -> f64 {
        let l = self.log2_denominator.max(other.log2_denominator);
        let a = (self.numerator as i128) << (l - self.log2_denominator);
        let b = (other.numerator as i128) << (l - other.log2_denominator);
        let modulus = 1i128 << l;
        let mut d = (a - b).rem_euclid(modulus);
        if 2 * d >= modulus {
            d -= modulus;
        }
        d as f64 / (l as f64).exp2()
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.log2_denominator)
    }
}

/// A point of the torus `[0, 1)`, optionally carrying an exact dyadic value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    value: f64,
    exact: Option<Dyadic>,
}

/// Reduces a difference in `(-1, 1)` to `[-1/2, 1/2)`. Both shifts are exact.
fn reduce_signed(d: f64) -> f64 {
    if d >= 0.5 {
        d - 1.0
    } else if d < -0.5 {
        d + 1.0
    } else {
        d
    }
}

impl TorusPoint {
    /// Wraps any finite real into `[0, 1)`; the result carries no exact form.
    pub fn new(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("torus point must be finite, got {x}")));
        }
        let mut v = x.rem_euclid(1.0);
        if v >= 1.0 {
            v = 0.0;
        }
        Ok(TorusPoint { value: v, exact: None })
    }

    pub fn from_dyadic(d: Dyadic) -> Self {
        TorusPoint { value: d.to_f64(), exact: Some(d) }
    }

    pub fn dyadic(numerator: u64, log2_denominator: u32) -> Result<Self> {
        Ok(Self::from_dyadic(Dyadic::new(numerator, log2_denominator)?))
    }

    pub fn zero() -> Self {
        Self::from_dyadic(Dyadic { numerator: 0, log2_denominator: 0 })
    }

    pub fn half() -> Self {
        Self::from_dyadic(Dyadic { numerator: 1, log2_denominator: 1 })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Dyadic> {
        self.exact
    }

    /// True only for the exact dyadic 1/2; a float that merely equals 0.5 does not count.
    pub fn is_exact_half(&self) -> bool {
        self.exact == Some(Dyadic { numerator: 1, log2_denominator: 1 })
    }

    /// `self - origin` on the torus, in `[-1/2, 1/2)`; exact when both points are.
    pub fn signed_offset(&self, origin: &TorusPoint) -> f64 {
        match (self.exact, origin.exact) {
            (Some(a), Some(b)) => a.signed_difference(b),
            _ => reduce_signed(self.value - origin.value),
        }
    }

    /// Torus distance in `[0, 1/2]`.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.signed_offset(other).abs()
    }

    /// `self - other mod 1`.
    pub fn sub(&self, other: &TorusPoint) -> TorusPoint {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => {
                let l = a.log2_denominator.max(b.log2_denominator);
                let x = (a.numerator as i128) << (l - a.log2_denominator);
                let y = (b.numerator as i128) << (l - b.log2_denominator);
                let d = (x - y).rem_euclid(1i128 << l) as u64;
                TorusPoint::from_dyadic(Dyadic::new(d, l).expect("reduced difference"))
            }
            _ => TorusPoint::new(self.value - other.value).expect("finite difference"),
        }
    }

    /// Image under the doubling map.
    pub fn double(&self) -> TorusPoint {
        match self.exact {
            Some(d) if d.log2_denominator > 0 => {
                let l = d.log2_denominator;
                let num = (d.numerator << 1) & ((1u64 << l) - 1);
                TorusPoint::from_dyadic(Dyadic::new(num >> 1, l - 1).expect("valid dyadic"))
            }
            Some(_) => TorusPoint::zero(),
            None => TorusPoint::new(2.0 * self.value).expect("finite"),
        }
    }

    /// Parses `k/2^n`, `k/m`, or a decimal literal. Decimals and fractions that are
    /// dyadic become exact; anything else is rounded to the nearest double and a
    /// note is returned.
    pub fn parse_with_note(s: &str) -> Result<(TorusPoint, Option<String>)> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse torus point `{s}`"));
        if let Some((num, den)) = s.split_once('/') {
            let num: u64 = num.trim().parse().map_err(|_| bad())?;
            let den = den.trim();
            let log2 = if let Some(exp) = den.strip_prefix("2^") {
                Some(exp.trim().parse::<u32>().map_err(|_| bad())?)
            } else {
                let m: u64 = den.parse().map_err(|_| bad())?;
                if m == 0 {
                    return Err(bad());
                }
                if m.is_power_of_two() {
                    Some(m.trailing_zeros())
                } else {
                    let v = (num % m) as f64 / m as f64;
                    let p = TorusPoint::new(v)?;
                    let note = format!("{s} is not dyadic; using nearest double {v:.17}");
                    return Ok((p, Some(note)));
                }
            };
            let l = log2.expect("set above");
            if l > 63 {
                return Err(bad());
            }
            let reduced = num % (1u64 << l).max(1);
            let reduced = if l == 0 { 0 } else { reduced };
            return Ok((TorusPoint::dyadic(reduced, l)?, None));
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if let Some(d) = decimal_as_dyadic(s) {
            return Ok((TorusPoint::from_dyadic(d), None));
        }
        Ok((TorusPoint::new(v)?, None))
    }
}

/// Exact dyadic form of a plain decimal literal in `[0, 1)` such as `0.375`.
fn decimal_as_dyadic(s: &str) -> Option<Dyadic> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if !int.chars().all(|ch| ch.is_ascii_digit()) || !frac.chars().all(|ch| ch.is_ascii_digit()) {
        return None;
    }
    if int.trim_start_matches('0') != "" {
        return None;
    }
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        return Some(Dyadic { numerator: 0, log2_denominator: 0 });
    }
    if frac.len() > 25 {
        return None;
    }
    let digits = frac.len() as u32;
    let n: u128 = frac.parse().ok()?;
    // n / 10^d is dyadic iff 5^d divides n, leaving (n / 5^d) / 2^d.
    let five = 5u128.pow(digits);
    if n % five != 0 {
        return None;
    }
    Dyadic::new((n / five) as u64, digits).ok()
}

impl FromStr for TorusPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TorusPoint::parse_with_note(s).map(|(p, _)| p)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(d) if d.log2_denominator <= 10 => write!(f, "{}", d),
            _ => write!(f, "{}", self.value),
        }
    }
}

/// A binary word of length `depth`, stored as the integer with those digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CylinderWord {
    pub depth: u32,
    pub index: u64,
}

impl CylinderWord {
    pub fn new(depth: u32, index: u64) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::InvalidArgument(format!("depth {depth} outside 1..={MAX_DEPTH}")));
        }
        if index >> depth != 0 {
            return Err(Error::InvalidArgument(format!("index {index} >= 2^{depth}")));
        }
        Ok(CylinderWord { depth, index })
    }

    /// Half-open dyadic interval `[k/2^n, (k+1)/2^n)` of the cylinder.
    pub fn interval(&self) -> (f64, f64) {
        cylinder_interval(*self)
    }

    pub fn prefix(&self) -> Option<CylinderWord> {
        (self.depth > 1).then(|| CylinderWord { depth: self.depth - 1, index: self.index >> 1 })
    }

    pub fn child(&self, bit: u64) -> CylinderWord {
        CylinderWord { depth: self.depth + 1, index: (self.index << 1) | (bit & 1) }
    }

    /// Successor states under the shift.
    pub fn successors(&self) -> [CylinderWord; 2] {
        let mask = (1u64 << self.depth) - 1;
        let base = (self.index << 1) & mask;
        [
            CylinderWord { depth: self.depth, index: base },
            CylinderWord { depth: self.depth, index: base | 1 },
        ]
    }
}

impl fmt::Display for CylinderWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.index, width = self.depth as usize)
    }
}

pub fn cylinder_interval(w: CylinderWord) -> (f64, f64) {
    let scale = (-(w.depth as f64)).exp2();
    (w.index as f64 * scale, (w.index + 1) as f64 * scale)
}

/// Words of length `n` whose cylinder meets the open ball of radius
/// `2^-(n+1)` around `c`. Always one or two words, sorted by index.
pub fn forbidden_words(c: &TorusPoint, n: u32) -> Result<Vec<CylinderWord>> {
    if n == 0 || n > MAX_DEPTH {
        return Err(Error::InvalidArgument(format!("depth {n} outside 1..={MAX_DEPTH}")));
    }
    // In units of 2^-(n+1): cylinder k is [2k, 2k+2), the ball is (C-1, C+1),
    // and they meet iff 2k - 1 < C < 2k + 3. Scaling by 2^(n+1) is exact.
    let big_c = c.value() * ((n + 1) as f64).exp2();
    let states = 1i64 << n;
    let home = (big_c / 2.0).floor() as i64;
    let mut out: Vec<CylinderWord> = Vec::with_capacity(2);
    for k in [home - 1, home, home + 1] {
        let kf = k as f64;
        if 2.0 * kf - 1.0 < big_c && big_c < 2.0 * kf + 3.0 {
            let idx = k.rem_euclid(states) as u64;
            let w = CylinderWord { depth: n, index: idx };
            if !out.contains(&w) {
                out.push(w);
            }
        }
    }
    out.sort();
    debug_assert!((1..=2).contains(&out.len()));
    Ok(out)
}

/// Marker for states that lie on no cycle of the cut-out graph.
pub const NO_COMPONENT: u32 = u32::MAX;

/// A strongly connected component of the allowed graph that carries a cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub size: usize,
    pub representative: u64,
    /// Gcd of cycle lengths; 1 means aperiodic.
    pub period: u64,
}

/// The depth-n cut-out subshift: de Bruijn graph on `2^n` states with the
/// forbidden words removed.
#[derive(Clone, Debug)]
pub struct SftGraph {
    c: TorusPoint,
    depth: u32,
    allowed: Vec<bool>,
    forbidden: Vec<CylinderWord>,
    component_of: Vec<u32>,
    components: Vec<Component>,
    strongly_connected: bool,
}

impl SftGraph {
    pub fn c(&self) -> &TorusPoint {
        &self.c
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_states(&self) -> usize {
        1usize << self.depth
    }

    pub fn mask(&self) -> u64 {
        (1u64 << self.depth) - 1
    }

    pub fn forbidden_words(&self) -> &[CylinderWord] {
        &self.forbidden
    }

    pub fn allowed(&self) -> &[bool] {
        &self.allowed
    }

    pub fn is_allowed(&self, state: u64) -> bool {
        self.allowed[state as usize]
    }

    pub fn allowed_count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }

    /// Whether the allowed states form a single strongly connected graph.
    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected
    }

    /// Cyclic components, largest first.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Component id per state, or [`NO_COMPONENT`].
    pub fn component_of(&self) -> &[u32] {
        &self.component_of
    }

    #[inline]
    pub fn successors(&self, state: u64) -> [u64; 2] {
        let base = (state << 1) & self.mask();
        [base, base | 1]
    }

    /// Allowed successors as `(edge word at depth n+1, target state)`.
    pub fn allowed_edges(&self, state: u64) -> impl Iterator<Item = (u64, u64)> + '_ {
        let ok = self.allowed[state as usize];
        self.successors(state).into_iter().enumerate().filter_map(move |(b, u)| {
            (ok && self.allowed[u as usize]).then_some(((state << 1) | b as u64, u))
        })
    }

    /// States of component `id` in increasing order.
    pub fn component_states(&self, id: u32) -> Vec<u64> {
        self.component_of
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == id)
            .map(|(s, _)| s as u64)
            .collect()
    }
}

/// The full shift at depth `n`: every state allowed, nothing cut out.
pub fn full_shift(c: &TorusPoint, n: u32) -> Result<SftGraph> {
    if n == 0 || n > MAX_DEPTH {
        return Err(Error::InvalidArgument(format!("depth {n} outside 1..={MAX_DEPTH}")));
    }
    let size = 1usize << n;
    Ok(SftGraph {
        c: *c,
        depth: n,
        allowed: vec![true; size],
        forbidden: Vec::new(),
        component_of: vec![0; size],
        components: vec![Component { size, representative: 0, period: 1 }],
        strongly_connected: true,
    })
}

/// Builds the cut-out de Bruijn graph of depth `n` around `c`.
pub fn build_sft(c: &TorusPoint, n: u32) -> Result<SftGraph> {
    let forbidden = forbidden_words(c, n)?;
    let size = 1usize << n;
    let mut allowed = vec![true; size];
    for w in &forbidden {
        allowed[w.index as usize] = false;
    }
    let mask = (1u64 << n) - 1;
    let succ = |s: u32| -> [u32; 2] {
        let base = ((s as u64) << 1) & mask;
        [base as u32, (base | 1) as u32]
    };
    let (scc, n_scc) = tarjan(&allowed, succ);

    // Sizes and cyclicity per raw SCC id.
    let mut sizes = vec![0usize; n_scc];
    let mut rep = vec![u32::MAX; n_scc];
    for (s, &k) in scc.iter().enumerate() {
        if k != NO_COMPONENT {
            sizes[k as usize] += 1;
            if rep[k as usize] == u32::MAX {
                rep[k as usize] = s as u32;
            }
        }
    }
    let cyclic: Vec<bool> = (0..n_scc)
        .map(|k| {
            sizes[k] > 1 || {
                let s = rep[k];
                succ(s).contains(&s)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n_scc).filter(|&k| cyclic[k]).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(rep[a].cmp(&rep[b])));
    if order.is_empty() {
        return Err(Error::DegenerateGraph { depth: n });
    }
    let mut remap = vec![NO_COMPONENT; n_scc];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new as u32;
    }
    let component_of: Vec<u32> = scc
        .iter()
        .map(|&k| if k == NO_COMPONENT { NO_COMPONENT } else { remap[k as usize] })
        .collect();
    let allowed_count = allowed.iter().filter(|&&a| a).count();
    let strongly_connected = order.len() == 1 && sizes[order[0]] == allowed_count;
    let components = order
        .iter()
        .map(|&k| Component {
            size: sizes[k],
            representative: rep[k] as u64,
            period: component_period(&component_of, remap[k], rep[k], succ),
        })
        .collect();
    Ok(SftGraph { c: *c, depth: n, allowed, forbidden, component_of, components, strongly_connected })
}

/// Gcd of cycle lengths inside one component, from BFS levels.
fn component_period(
    component_of: &[u32],
    id: u32,
    start: u32,
    succ: impl Fn(u32) -> [u32; 2],
) -> u64 {
    let mut level = std::collections::HashMap::new();
    level.insert(start, 0i64);
    let mut queue = std::collections::VecDeque::from([start]);
    let mut g: i64 = 0;
    while let Some(u) = queue.pop_front() {
        let lu = level[&u];
        for v in succ(u) {
            if component_of[v as usize] != id {
                continue;
            }
            match level.get(&v) {
                Some(&lv) => g = gcd(g, (lu + 1 - lv).abs()),
                None => {
                    level.insert(v, lu + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    g.max(1) as u64
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Iterative Tarjan SCC over allowed states. States that are not allowed get
/// [`NO_COMPONENT`].
fn tarjan(allowed: &[bool], succ: impl Fn(u32) -> [u32; 2]) -> (Vec<u32>, usize) {
    const UNSEEN: u32 = u32::MAX;
    let n = allowed.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![NO_COMPONENT; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, u8)> = Vec::new();
    let mut next_index = 0u32;
    let mut n_comp = 0u32;

    for root in 0..n as u32 {
        if !allowed[root as usize] || index[root as usize] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut child)) = call.last_mut() {
            if *child < 2 {
                let w = succ(v)[*child as usize];
                *child += 1;
                if !allowed[w as usize] {
                    continue;
                }
                if index[w as usize] == UNSEEN {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent as usize] = low[parent as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w as usize] = false;
                        comp[w as usize] = n_comp;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
            }
        }
    }
    (comp, n_comp as usize)
}
