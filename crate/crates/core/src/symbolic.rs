//! Subshifts of finite type, admissible words and cylinder functions.
//!
//! The alphabet is `{0, …, d−1}` and `transitions[i][j] = 1` means that `j`
//! may follow `i`. A word `w_0 w_1 … w_{n−1}` is encoded as the base-`d`
//! integer with `w_0` most significant, so numeric order on codes is
//! lexicographic order on words of a fixed length.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest word set that will be enumerated.
pub const MAX_WORDS: usize = 1 << 22;

/// A word over the alphabet of a subshift.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl From<&[usize]> for Word {
    fn from(v: &[usize]) -> Self {
        Word(v.to_vec())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.0.iter().any(|&s| s >= 10) { "." } else { "" };
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(sep))
    }
}

#[derive(Debug, PartialEq, Eq)]
struct SpecInner {
    alphabet_size: usize,
    transitions: Vec<bool>,
}

/// Alphabet size plus 0/1 transition matrix. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubshiftSpec {
    inner: Arc<SpecInner>,
}

impl SubshiftSpec {
    pub fn new(transitions: Vec<Vec<u8>>) -> Result<Self> {
        let d = transitions.len();
        if d == 0 {
            return Err(Error::InvalidSpec("alphabet must be non-empty".into()));
        }
        let mut flat = Vec::with_capacity(d * d);
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidSpec(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            for (j, &t) in row.iter().enumerate() {
                match t {
                    0 => flat.push(false),
                    1 => flat.push(true),
                    _ => return Err(Error::InvalidSpec(format!("entry ({i},{j}) = {t} is not 0 or 1"))),
                }
            }
        }
        Self::from_flat(d, flat)
    }

    fn from_flat(d: usize, flat: Vec<bool>) -> Result<Self> {
        for i in 0..d {
            if !(0..d).any(|j| flat[i * d + j]) {
                return Err(Error::InvalidSpec(format!("symbol {i} has no successor")));
            }
            if !(0..d).any(|j| flat[j * d + i]) {
                return Err(Error::InvalidSpec(format!("symbol {i} has no predecessor")));
            }
        }
        Ok(SubshiftSpec {
            inner: Arc::new(SpecInner {
                alphabet_size: d,
                transitions: flat,
            }),
        })
    }

    /// The full shift on `d` symbols.
    pub fn full_shift(d: usize) -> Result<Self> {
        Self::new(vec![vec![1; d]; d])
    }

    /// Transitions `[[1,1],[1,0]]`: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean shift is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.inner.alphabet_size
    }

    #[inline]
    pub fn allowed(&self, from: usize, to: usize) -> bool {
        self.inner.transitions[from * self.inner.alphabet_size + to]
    }

    pub fn transition_rows(&self) -> Vec<Vec<u8>> {
        let d = self.alphabet_size();
        (0..d)
            .map(|i| (0..d).map(|j| self.allowed(i, j) as u8).collect())
            .collect()
    }

    pub fn is_admissible(&self, word: &[usize]) -> bool {
        let d = self.alphabet_size();
        word.iter().all(|&s| s < d) && word.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    pub fn admissible_transition_count(&self) -> usize {
        self.inner.transitions.iter().filter(|&&t| t).count()
    }

    /// Admissible words of length `n` in lexicographic order.
    pub fn admissible_words(&self, n: usize) -> Vec<Word> {
        match self.word_set(n) {
            Ok(ws) => (0..ws.len()).map(|i| ws.word(i)).collect(),
            Err(_) => Vec::new(),
        }
    }

    /// Number of admissible words of length `n ≥ 1`, saturating at `usize::MAX`.
    pub fn word_count(&self, n: usize) -> usize {
        let d = self.alphabet_size();
        let mut ending = vec![1usize; d];
        for _ in 1..n {
            let mut next = vec![0usize; d];
            for (i, &c) in ending.iter().enumerate() {
                for (j, slot) in next.iter_mut().enumerate() {
                    if self.allowed(i, j) {
                        *slot = slot.saturating_add(c);
                    }
                }
            }
            ending = next;
        }
        ending.into_iter().fold(0, usize::saturating_add)
    }

    /// Indexed set of admissible words of length `n ≥ 1`; at most [`MAX_WORDS`] of them.
    pub fn word_set(&self, n: usize) -> Result<Arc<WordSet>> {
        WordSet::build(self.clone(), n).map(Arc::new)
    }

    /// Whether some power `M^k`, `k ≤ (d−1)²+1`, is strictly positive.
    pub fn is_primitive(&self) -> bool {
        let d = self.alphabet_size();
        let m: Vec<bool> = self.inner.transitions.clone();
        let bound = (d - 1) * (d - 1) + 1;
        let mut power = m.clone();
        for _ in 0..bound {
            if power.iter().all(|&x| x) {
                return true;
            }
            let mut next = vec![false; d * d];
            for i in 0..d {
                for k in 0..d {
                    if power[i * d + k] {
                        for j in 0..d {
                            if m[k * d + j] {
                                next[i * d + j] = true;
                            }
                        }
                    }
                }
            }
            power = next;
        }
        power.iter().all(|&x| x)
    }

    pub(crate) fn same_as(&self, other: &SubshiftSpec) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner == other.inner
    }
}

/// Sorted admissible words of a fixed length, addressable by index.
#[derive(Debug, Clone)]
pub struct WordSet {
    spec: SubshiftSpec,
    depth: usize,
    codes: Vec<u64>,
}

impl WordSet {
    fn build(spec: SubshiftSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("word length must be at least 1".into()));
        }
        let d = spec.alphabet_size() as u64;
        if d > 1 && d.checked_pow(n as u32).is_none() {
            return Err(Error::InvalidArgument(format!(
                "words of length {n} over {d} symbols exceed the code range"
            )));
        }
        if n > MAX_WORDS {
            return Err(Error::InvalidArgument(format!("word length {n} exceeds {MAX_WORDS}")));
        }
        let count = spec.word_count(n);
        if count > MAX_WORDS {
            return Err(Error::InvalidArgument(format!(
                "{count} admissible words of length {n} exceed the limit of {MAX_WORDS}"
            )));
        }
        // Extending in increasing successor order keeps the list sorted.
        let mut words: Vec<(u64, usize)> = (0..spec.alphabet_size()).map(|s| (s as u64, s)).collect();
        for _ in 1..n {
            let mut next = Vec::with_capacity(words.len() * 2);
            for &(code, last) in &words {
                for s in 0..spec.alphabet_size() {
                    if spec.allowed(last, s) {
                        next.push((code * d + s as u64, s));
                    }
                }
            }
            words = next;
        }
        Ok(WordSet {
            spec,
            depth: n,
            codes: words.into_iter().map(|(c, _)| c).collect(),
        })
    }

    pub fn spec(&self) -> &SubshiftSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    #[inline]
    pub fn index_of_code(&self, code: u64) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }

    pub fn index_of(&self, word: &[usize]) -> Option<usize> {
        if word.len() != self.depth {
            return None;
        }
        let d = self.spec.alphabet_size();
        if word.iter().any(|&s| s >= d) {
            return None;
        }
        self.index_of_code(encode(word, d))
    }

    pub fn word(&self, idx: usize) -> Word {
        Word(decode(self.codes[idx], self.depth, self.spec.alphabet_size()))
    }

    pub fn iter(&self) -> impl Iterator<Item = Word> + '_ {
        (0..self.len()).map(move |i| self.word(i))
    }
}

pub(crate) fn encode(word: &[usize], d: usize) -> u64 {
    word.iter().fold(0u64, |acc, &s| acc * d as u64 + s as u64)
}

pub(crate) fn decode(mut code: u64, len: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (code % d as u64) as usize;
        code /= d as u64;
    }
    out
}

#[inline]
pub(crate) fn pow(d: usize, e: usize) -> u64 {
    (d as u64).pow(e as u32)
}

/// A real function of the first `depth` coordinates, tabulated on admissible words.
#[derive(Debug, Clone)]
pub struct CylinderFunction {
    words: Arc<WordSet>,
    values: Vec<f64>,
}

impl CylinderFunction {
    pub fn from_values(words: Arc<WordSet>, values: Vec<f64>) -> Result<Self> {
        if values.len() != words.len() {
            return Err(Error::InvalidFunction(format!(
                "{} values for {} admissible words of length {}",
                values.len(),
                words.len(),
                words.depth()
            )));
        }
        Ok(CylinderFunction { words, values })
    }

    pub fn from_fn(spec: &SubshiftSpec, depth: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let words = spec.word_set(depth)?;
        let d = spec.alphabet_size();
        let values = words.codes().iter().map(|&c| f(&decode(c, depth, d))).collect();
        Ok(CylinderFunction { words, values })
    }

    pub fn constant(spec: &SubshiftSpec, depth: usize, value: f64) -> Result<Self> {
        let words = spec.word_set(depth)?;
        let values = vec![value; words.len()];
        Ok(CylinderFunction { words, values })
    }

    /// Depth-2 function from a `d×d` matrix; entries at forbidden transitions are ignored.
    pub fn from_matrix(spec: &SubshiftSpec, m: &[Vec<f64>]) -> Result<Self> {
        let d = spec.alphabet_size();
        if m.len() != d || m.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidFunction(format!("expected a {d}x{d} matrix")));
        }
        Self::from_fn(spec, 2, |w| m[w[0]][w[1]])
    }

    pub fn spec(&self) -> &SubshiftSpec {
        self.words.spec()
    }

    pub fn depth(&self) -> usize {
        self.words.depth()
    }

    pub fn words(&self) -> &Arc<WordSet> {
        &self.words
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, word: &[usize]) -> Option<f64> {
        self.words.index_of(word).map(|i| self.values[i])
    }

    /// Value at an arbitrary admissible word at least as long as the depth.
    pub fn eval_prefix(&self, word: &[usize]) -> Option<f64> {
        if word.len() < self.depth() {
            return None;
        }
        self.get(&word[..self.depth()])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        CylinderFunction {
            words: self.words.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same function viewed at a larger depth (trailing coordinates ignored).
    pub fn extend_to(&self, depth: usize) -> Result<Self> {
        let k = self.depth();
        if depth < k {
            return Err(Error::DepthMismatch {
                expected: format!(">= {k}"),
                found: depth,
            });
        }
        if depth == k {
            return Ok(self.clone());
        }
        let target = self.spec().word_set(depth)?;
        let div = pow(self.spec().alphabet_size(), depth - k);
        let values = target
            .codes()
            .iter()
            .map(|&c| {
                let i = self
                    .words
                    .index_of_code(c / div)
                    .expect("prefix of an admissible word is admissible");
                self.values[i]
            })
            .collect();
        Ok(CylinderFunction { words: target, values })
    }

    /// `α(f) = f∘T`: depth grows by one, value at `w_0…w_k` is `f(w_1…w_k)`.
    pub fn alpha_lift(&self) -> Result<Self> {
        let k = self.depth();
        let target = self.spec().word_set(k + 1)?;
        let modulus = pow(self.spec().alphabet_size(), k);
        let values = target
            .codes()
            .iter()
            .map(|&c| {
                let i = self
                    .words
                    .index_of_code(c % modulus)
                    .expect("suffix of an admissible word is admissible");
                self.values[i]
            })
            .collect();
        Ok(CylinderFunction { words: target, values })
    }

    /// `α^n(f)`.
    pub fn alpha_pow(&self, n: usize) -> Result<Self> {
        let mut out = self.clone();
        for _ in 0..n {
            out = out.alpha_lift()?;
        }
        Ok(out)
    }

    /// Pointwise combination after lifting both to the larger depth.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.spec().same_as(other.spec()) {
            return Err(Error::SpecMismatch);
        }
        let depth = self.depth().max(other.depth());
        let a = self.extend_to(depth)?;
        let b = other.extend_to(depth)?;
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect();
        Ok(CylinderFunction { words: a.words, values })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x / y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest depth `e ≤ depth` such that the function depends only on the first `e` coordinates.
    pub fn effective_depth(&self, tol: f64) -> usize {
        let d = self.spec().alphabet_size();
        for e in 0..self.depth() {
            let div = pow(d, self.depth() - e);
            let mut first: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
            let ok = self.words.codes().iter().zip(&self.values).all(|(&c, &v)| {
                let key = c / div;
                let r = *first.entry(key).or_insert(v);
                (r - v).abs() <= tol * r.abs().max(1.0)
            });
            if ok {
                return e;
            }
        }
        self.depth()
    }
}

/// A strictly positive weight `ρ = e^A`, stored through its logarithm `A`.
#[derive(Debug, Clone)]
pub struct CylinderPotential {
    log: CylinderFunction,
}

impl CylinderPotential {
    /// From log-weights `A`.
    pub fn from_log(a: CylinderFunction) -> Result<Self> {
        if let Some(bad) = a.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite log weight {bad}")));
        }
        Ok(CylinderPotential { log: a })
    }

    /// From strictly positive weights `ρ`.
    pub fn from_weights(rho: CylinderFunction) -> Result<Self> {
        if let Some(bad) = rho.values().iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "weight {bad} is not strictly positive"
            )));
        }
        Self::from_log(rho.map(f64::ln))
    }

    /// `ρ = H^{−β}`, i.e. `A = −β log H`.
    pub fn from_h(h: &CylinderFunction, beta: f64) -> Result<Self> {
        if let Some(bad) = h.values().iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidPotential(format!(
                "H value {bad} is not strictly positive"
            )));
        }
        Self::from_log(h.map(|x| -beta * x.ln()))
    }

    pub fn constant(spec: &SubshiftSpec, log_value: f64) -> Result<Self> {
        Self::from_log(CylinderFunction::constant(spec, 2, log_value)?)
    }

    /// Log-weights from a `d×d` matrix of positive weights.
    pub fn from_weight_matrix(spec: &SubshiftSpec, m: &[Vec<f64>]) -> Result<Self> {
        Self::from_weights(CylinderFunction::from_matrix(spec, m)?)
    }

    pub fn spec(&self) -> &SubshiftSpec {
        self.log.spec()
    }

    pub fn depth(&self) -> usize {
        self.log.depth()
    }

    pub fn log_weights(&self) -> &CylinderFunction {
        &self.log
    }

    pub fn weights(&self) -> CylinderFunction {
        self.log.map(f64::exp)
    }

    /// `A + c`, i.e. `ρ·e^c`.
    pub fn shifted(&self, c: f64) -> Self {
        CylinderPotential {
            log: self.log.map(|a| a + c),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        CylinderPotential {
            log: self.log.map(|a| a * s),
        }
    }

    /// Depth-1 potentials are replicated to depth 2; deeper ones are unchanged.
    pub fn canonical(&self) -> Self {
        if self.depth() >= 2 {
            return self.clone();
        }
        CylinderPotential {
            log: self.log.extend_to(2).expect("depth 2 words exist"),
        }
    }
}

/// Output of [`higher_block_recode`].
#[derive(Debug, Clone)]
pub struct Recoded {
    pub spec: SubshiftSpec,
    pub potential: CylinderPotential,
    /// Original words of length `m−1`; recoded symbol `s` is `blocks.word(s)`.
    pub blocks: Arc<WordSet>,
    pub original_depth: usize,
}

impl Recoded {
    /// Recoded image of an admissible original word of length `n ≥ m−1`.
    pub fn encode_word(&self, word: &[usize]) -> Option<Word> {
        let b = self.blocks.depth();
        if word.len() < b {
            return None;
        }
        word.windows(b)
            .map(|w| self.blocks.index_of(w))
            .collect::<Option<Vec<_>>>()
            .map(Word)
    }

    /// Original word spelled by a recoded word.
    pub fn decode_word(&self, word: &[usize]) -> Word {
        let mut out = Vec::new();
        for (t, &s) in word.iter().enumerate() {
            let block = self.blocks.word(s).0;
            if t == 0 {
                out.extend(block);
            } else {
                out.push(*block.last().expect("blocks are non-empty"));
            }
        }
        Word(out)
    }
}

/// Recodes a depth-`m` potential as a two-coordinate potential on the
/// `(m−1)`-block presentation of the shift.
pub fn higher_block_recode(pot: &CylinderPotential) -> Result<Recoded> {
    let m = pot.depth();
    if m < 2 {
        return Err(Error::DepthMismatch {
            expected: ">= 2".into(),
            found: m,
        });
    }
    let spec = pot.spec();
    let d = spec.alphabet_size();
    let blocks = spec.word_set(m - 1)?;
    if m == 2 {
        return Ok(Recoded {
            spec: spec.clone(),
            potential: pot.clone(),
            blocks,
            original_depth: 2,
        });
    }
    let n = blocks.len();
    let tail_mod = pow(d, m - 2);
    let mut flat = vec![false; n * n];
    for (i, &ci) in blocks.codes().iter().enumerate() {
        for (j, &cj) in blocks.codes().iter().enumerate() {
            // overlap: w[1..] == w'[..m−2]
            if ci % tail_mod == cj / d as u64 {
                flat[i * n + j] = true;
            }
        }
    }
    let new_spec = SubshiftSpec::from_flat(n, flat)?;
    let log = pot.log_weights();
    let new_log = CylinderFunction::from_fn(&new_spec, 2, |w| {
        let code = blocks.codes()[w[0]] * d as u64 + blocks.codes()[w[1]] % d as u64;
        let i = log
            .words()
            .index_of_code(code)
            .expect("overlapping blocks spell an admissible word");
        log.values()[i]
    })?;
    Ok(Recoded {
        spec: new_spec,
        potential: CylinderPotential { log: new_log },
        blocks,
        original_depth: m,
    })
}
