//! Byte-pair encoding over token streams.
//!
//! Training repeatedly replaces the most frequent adjacent pair with a new
//! token id. Frequency ties go to the lexicographically smallest pair, and
//! pairs never span a sequence boundary. Both training and encoding run on
//! per-sequence linked lists with a lazily invalidated heap, so each merge
//! only touches the positions where its pair occurs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{TokenId, TokenStream};

pub const DEFAULT_MAX_MERGES: usize = 2048;

type Pair = (TokenId, TokenId);

const NONE: usize = usize::MAX;
const DEAD: TokenId = TokenId::MAX;

/// Ordered merge rules; rule `i` produces token `base_vocab + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct MergeTable {
    pub base_vocab: u32,
    pub merges: Vec<Pair>,
}

#[derive(Deserialize)]
struct RawTable {
    base_vocab: u32,
    merges: Vec<Pair>,
}

impl TryFrom<RawTable> for MergeTable {
    type Error = Error;

    fn try_from(r: RawTable) -> Result<Self> {
        MergeTable::new(r.base_vocab, r.merges)
    }
}

impl MergeTable {
    pub fn new(base_vocab: u32, merges: Vec<Pair>) -> Result<Self> {
        for (i, &(l, r)) in merges.iter().enumerate() {
            let id = base_vocab + i as u32;
            if l >= id || r >= id {
                return Err(Error::VocabMismatch(format!("merge {i} ({l}, {r}) references an id >= {id}")));
            }
        }
        Ok(Self { base_vocab, merges })
    }

    pub fn vocab_size(&self) -> u32 {
        self.base_vocab + self.merges.len() as u32
    }

    /// Appends the base tokens that `token` stands for.
    fn expand_into(&self, token: TokenId, out: &mut Vec<TokenId>) -> Result<()> {
        let mut stack = vec![token];
        while let Some(t) = stack.pop() {
            if t < self.base_vocab {
                out.push(t);
            } else {
                let &(l, r) = self.merges.get((t - self.base_vocab) as usize).ok_or(Error::UnknownToken(t))?;
                stack.push(r);
                stack.push(l);
            }
        }
        Ok(())
    }
}

/// Doubly linked token list over one or more sequences; links never cross
/// a sequence boundary.
struct Chain {
    tok: Vec<TokenId>,
    prev: Vec<usize>,
    next: Vec<usize>,
}

impl Chain {
    fn new(tokens: &[TokenId], boundaries: &[usize]) -> Self {
        let n = tokens.len();
        let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
        let mut next: Vec<usize> = (1..=n).collect();
        let ends = boundaries.iter().skip(1).copied().chain(std::iter::once(n));
        for (&start, end) in boundaries.iter().zip(ends) {
            if start < n {
                prev[start] = NONE;
            }
            if end > 0 {
                next[end - 1] = NONE;
            }
        }
        if n > 0 {
            prev[0] = NONE;
        }
        Self { tok: tokens.to_vec(), prev, next }
    }

    fn pair_at(&self, i: usize) -> Option<Pair> {
        let j = self.next[i];
        (self.tok[i] != DEAD && j != NONE).then(|| (self.tok[i], self.tok[j]))
    }

    /// Merges the pair starting at `i` into `new`; returns `(prev, i, next)`
    /// neighbours before the merge for count bookkeeping.
    fn merge(&mut self, i: usize, new: TokenId) -> (usize, usize) {
        let j = self.next[i];
        let nn = self.next[j];
        self.tok[i] = new;
        self.tok[j] = DEAD;
        self.next[i] = nn;
        if nn != NONE {
            self.prev[nn] = i;
        }
        (self.prev[i], nn)
    }

    fn live_runs(&self, boundaries: &[usize]) -> Vec<Vec<TokenId>> {
        boundaries
            .iter()
            .map(|&start| {
                let mut run = Vec::new();
                let mut i = start;
                while i != NONE {
                    run.push(self.tok[i]);
                    i = self.next[i];
                }
                run
            })
            .collect()
    }
}

struct PairCounts {
    counts: HashMap<Pair, i64>,
    positions: HashMap<Pair, Vec<usize>>,
    heap: BinaryHeap<(i64, Reverse<Pair>)>,
}

impl PairCounts {
    fn add(&mut self, pair: Pair, pos: usize) {
        let c = self.counts.entry(pair).or_insert(0);
        *c += 1;
        self.heap.push((*c, Reverse(pair)));
        self.positions.entry(pair).or_default().push(pos);
    }

    fn remove(&mut self, pair: Pair) {
        let c = self.counts.get_mut(&pair).expect("removing a counted pair");
        *c -= 1;
        if *c > 0 {
            self.heap.push((*c, Reverse(pair)));
        }
    }

    /// Most frequent live pair, smallest pair on ties.
    fn pop_best(&mut self) -> Option<(Pair, i64)> {
        while let Some((c, Reverse(pair))) = self.heap.pop() {
            if self.counts.get(&pair) == Some(&c) {
                return Some((pair, c));
            }
        }
        None
    }
}

/// Learns up to `max_merges` merge rules from `corpus`. Training stops early
/// once the most frequent pair occurs fewer than twice.
pub fn train(corpus: &TokenStream, max_merges: usize) -> Result<MergeTable> {
    corpus.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if corpus.vocab_size != corpus.base_vocab {
        return Err(Error::VocabMismatch("train BPE on an un-merged stream".into()));
    }
    let base = corpus.base_vocab;
    let mut chain = Chain::new(&corpus.tokens, &corpus.sequence_boundaries);
    let mut pc = PairCounts { counts: HashMap::new(), positions: HashMap::new(), heap: BinaryHeap::new() };
    for i in 0..chain.tok.len() {
        if let Some(pair) = chain.pair_at(i) {
            pc.add(pair, i);
        }
    }

    let mut merges = Vec::new();
    while merges.len() < max_merges {
        let Some((pair, count)) = pc.pop_best() else { break };
        if count < 2 {
            break;
        }
        let new = base + merges.len() as TokenId;
        merges.push(pair);
        let mut sites = pc.positions.remove(&pair).unwrap_or_default();
        sites.sort_unstable();
        sites.dedup();
        for i in sites {
            if chain.pair_at(i) != Some(pair) {
                continue;
            }
            let p = chain.prev[i];
            let nn = chain.next[chain.next[i]];
            pc.remove(pair);
            if p != NONE {
                pc.remove((chain.tok[p], pair.0));
            }
            if nn != NONE {
                pc.remove((pair.1, chain.tok[nn]));
            }
            chain.merge(i, new);
            if p != NONE {
                pc.add((chain.tok[p], new), p);
            }
            if nn != NONE {
                pc.add((new, chain.tok[nn]), i);
            }
        }
    }
    MergeTable::new(base, merges)
}

fn encode_run(run: &[TokenId], ranks: &HashMap<Pair, u32>, base: u32) -> Vec<TokenId> {
    let mut chain = Chain::new(run, &[0]);
    let mut heap: BinaryHeap<Reverse<(u32, usize)>> = (0..run.len())
        .filter_map(|i| chain.pair_at(i).and_then(|p| ranks.get(&p)).map(|&r| Reverse((r, i))))
        .collect();
    while let Some(Reverse((rank, i))) = heap.pop() {
        match chain.pair_at(i) {
            Some(p) if ranks.get(&p) == Some(&rank) => {}
            _ => continue,
        }
        let new = base + rank;
        let (p, nn) = chain.merge(i, new);
        if p != NONE {
            if let Some(&r) = ranks.get(&(chain.tok[p], new)) {
                heap.push(Reverse((r, p)));
            }
        }
        if nn != NONE {
            if let Some(&r) = ranks.get(&(new, chain.tok[nn])) {
                heap.push(Reverse((r, i)));
            }
        }
    }
    chain.live_runs(&[0]).pop().unwrap_or_default()
}

/// Applies the merge rules in training order, exhaustively, inside each
/// sequence of `ts`.
pub fn encode(ts: &TokenStream, table: &MergeTable) -> Result<TokenStream> {
    ts.validate()?;
    if ts.base_vocab != table.base_vocab {
        return Err(Error::VocabMismatch(format!(
            "stream base vocabulary {} vs merge table {}",
            ts.base_vocab, table.base_vocab
        )));
    }
    if let Some(&t) = ts.tokens.iter().find(|&&t| t >= table.vocab_size()) {
        return Err(Error::VocabMismatch(format!("token {t} is not covered by the merge table")));
    }
    let ranks: HashMap<Pair, u32> = table.merges.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
    let runs: Vec<&[TokenId]> = ts.sequences().collect();
    let encoded: Vec<Vec<TokenId>> = runs.par_iter().map(|run| encode_run(run, &ranks, table.base_vocab)).collect();
    let mut out = TokenStream::from_sequences(encoded, ts);
    out.vocab_size = table.vocab_size();
    Ok(out)
}

/// Expands merged ids back to base tokens.
pub fn decode(ts: &TokenStream, table: &MergeTable) -> Result<TokenStream> {
    if ts.base_vocab != table.base_vocab {
        return Err(Error::VocabMismatch(format!(
            "stream base vocabulary {} vs merge table {}",
            ts.base_vocab, table.base_vocab
        )));
    }
    let runs = ts
        .sequences()
        .map(|run| {
            let mut out = Vec::with_capacity(run.len() * 2);
            for &t in run {
                table.expand_into(t, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = TokenStream::from_sequences(runs, ts);
    out.vocab_size = table.base_vocab;
    Ok(out)
}

/// Compression figures relative to the uncompressed binary representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    /// `baseline / compressed`.
    pub ratio: f64,
    /// `1 - compressed / baseline`.
    pub space_saving: f64,
    /// `original / compressed`: the gain from BPE alone.
    pub bpe_ratio: f64,
}

pub fn compression_stats(original_tokens: usize, compressed_tokens: usize, baseline_tokens: usize) -> Result<CompressionStats> {
    if original_tokens == 0 || compressed_tokens == 0 || baseline_tokens == 0 {
        return Err(Error::ZeroLength);
    }
    let (o, c, b) = (original_tokens as f64, compressed_tokens as f64, baseline_tokens as f64);
    Ok(CompressionStats { ratio: b / c, space_saving: 1.0 - c / b, bpe_ratio: o / c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::DistributionKind;
    use crate::stream::AxisMode;
    use proptest::prelude::*;

    fn stream(runs: Vec<Vec<TokenId>>, base: u32) -> TokenStream {
        let template = TokenStream {
            tokens: vec![],
            base_vocab: base,
            vocab_size: base,
            tokens_per_sample: 1,
            axis_mode: AxisMode::Pooled,
            tokenizer_id: "test".into(),
            sequence_boundaries: vec![],
            sample_rate_hz: 100.0,
            distribution: DistributionKind::Position,
        };
        TokenStream::from_sequences(runs, &template)
    }

    /// Reference trainer: recount and rewrite the whole corpus per merge.
    fn naive_train(runs: &[Vec<TokenId>], base: u32, max: usize) -> Vec<Pair> {
        let mut runs = runs.to_vec();
        let mut merges = Vec::new();
        while merges.len() < max {
            let mut counts: HashMap<Pair, usize> = HashMap::new();
            for r in &runs {
                for w in r.windows(2) {
                    *counts.entry((w[0], w[1])).or_default() += 1;
                }
            }
            let Some((&pair, &c)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else { break };
            if c < 2 {
                break;
            }
            let new = base + merges.len() as u32;
            merges.push(pair);
            runs = runs.iter().map(|r| naive_apply(r, pair, new)).collect();
        }
        merges
    }

    fn naive_apply(run: &[TokenId], pair: Pair, new: TokenId) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(run.len());
        let mut i = 0;
        while i < run.len() {
            if i + 1 < run.len() && (run[i], run[i + 1]) == pair {
                out.push(new);
                i += 2;
            } else {
                out.push(run[i]);
                i += 1;
            }
        }
        out
    }

    #[test]
    fn single_merge_hand_case() {
        let ts = stream(vec![vec![0, 1, 0, 1, 0, 1]], 2048);
        let table = train(&ts, 1).unwrap();
        assert_eq!(table.merges, vec![(0, 1)]);
        let enc = encode(&ts, &table).unwrap();
        assert_eq!(enc.tokens, vec![2048, 2048, 2048]);
        assert_eq!(enc.vocab_size, 2049);
        assert_eq!(decode(&enc, &table).unwrap(), ts);
    }

    #[test]
    fn merge_applies_once_in_short_run() {
        let table = MergeTable::new(2048, vec![(0, 1)]).unwrap();
        let enc = encode(&stream(vec![vec![1, 0, 1]], 2048), &table).unwrap();
        assert_eq!(enc.tokens, vec![1, 2048]);
    }

    #[test]
    fn no_repeated_pairs_no_merges() {
        let ts = stream(vec![vec![0, 1, 2, 3, 4, 5]], 8);
        assert!(train(&ts, 10).unwrap().merges.is_empty());
        assert!(train(&stream(vec![vec![0, 1, 0, 1]], 8), 0).unwrap().merges.is_empty());
    }

    #[test]
    fn empty_table_is_identity() {
        let ts = stream(vec![vec![3, 3, 3], vec![1]], 8);
        let table = MergeTable::new(8, vec![]).unwrap();
        assert_eq!(encode(&ts, &table).unwrap(), ts);
        assert_eq!(decode(&ts, &table).unwrap(), ts);
    }

    #[test]
    fn errors() {
        assert!(matches!(train(&stream(vec![], 8), 4), Err(Error::EmptyCorpus)));
        let table = MergeTable::new(8, vec![(0, 1)]).unwrap();
        let mut ts = stream(vec![vec![9999]], 8);
        ts.vocab_size = 10_000;
        assert!(matches!(decode(&ts, &table), Err(Error::UnknownToken(9999))));
        assert!(matches!(encode(&ts, &table), Err(Error::VocabMismatch(_))));
        assert!(MergeTable::new(8, vec![(0, 8)]).is_err());
        assert!(serde_json::from_str::<MergeTable>(r#"{"base_vocab":2,"merges":[[0,5]]}"#).is_err());
    }

    #[test]
    fn runs_merge_left_to_right() {
        let ts = stream(vec![vec![5, 5, 5, 5, 5]], 8);
        let table = train(&ts, 8).unwrap();
        assert_eq!(table.merges, naive_train(&[vec![5, 5, 5, 5, 5]], 8, 8));
        let enc = encode(&ts, &table).unwrap();
        assert_eq!(decode(&enc, &table).unwrap(), ts);
    }

    #[test]
    fn merges_respect_boundaries() {
        // (1, 0) occurs twice but only across the boundary.
        let ts = stream(vec![vec![0, 1], vec![0, 1], vec![0, 1]], 4);
        let table = train(&ts, 4).unwrap();
        assert_eq!(table.merges, vec![(0, 1)]);
        let enc = encode(&ts, &table).unwrap();
        assert_eq!(enc.tokens, vec![4, 4, 4]);
        assert_eq!(enc.sequence_boundaries, vec![0, 1, 2]);
    }

    #[test]
    fn stats() {
        let s = compression_stats(1, 1, 8).unwrap();
        assert_eq!((s.ratio, s.space_saving), (8.0, 0.875));
        let s = compression_stats(2, 2, 8).unwrap();
        assert_eq!((s.ratio, s.space_saving), (4.0, 0.75));
        let s = compression_stats(5, 5, 5).unwrap();
        assert_eq!((s.ratio, s.space_saving, s.bpe_ratio), (1.0, 0.0, 1.0));
        assert!(matches!(compression_stats(0, 1, 1), Err(Error::ZeroLength)));
    }

    fn runs_strategy() -> impl Strategy<Value = Vec<Vec<TokenId>>> {
        prop::collection::vec(prop::collection::vec(0u32..6, 1..60), 1..5)
    }

    proptest! {
        #[test]
        fn matches_naive_trainer(runs in runs_strategy(), max in 0usize..30) {
            let table = train(&stream(runs.clone(), 6), max).unwrap();
            prop_assert_eq!(&table.merges, &naive_train(&runs, 6, max));
        }

        #[test]
        fn encode_matches_sequential_rewrites(runs in runs_strategy(), max in 0usize..30) {
            let ts = stream(runs.clone(), 6);
            let table = train(&ts, max).unwrap();
            let enc = encode(&ts, &table).unwrap();
            let mut expected = runs.clone();
            for (i, &pair) in table.merges.iter().enumerate() {
                expected = expected.iter().map(|r| naive_apply(r, pair, 6 + i as u32)).collect();
            }
            prop_assert_eq!(enc.sequences().map(<[u32]>::to_vec).collect::<Vec<_>>(), expected);
        }

        #[test]
        fn lossless_and_monotone(runs in runs_strategy(), max in 0usize..30) {
            let ts = stream(runs, 6);
            let small = train(&ts, max).unwrap();
            let large = train(&ts, max + 5).unwrap();
            let enc_small = encode(&ts, &small).unwrap();
            let enc_large = encode(&ts, &large).unwrap();
            prop_assert!(enc_large.len() <= enc_small.len());
            prop_assert!(enc_small.len() <= ts.len());
            prop_assert_eq!(&decode(&enc_large, &large).unwrap(), &ts);
            prop_assert_eq!(enc_large.sequence_count(), ts.sequence_count());
        }
    }
}
