//! Token alignment and masked sequences.
//!
//! A masked sequence is an original token sequence in which whole spans
//! (possibly empty ones, for insertions) are replaced by a single `<mask>`.
//! Ground-truth masks come from the longest common subsequence of an
//! original/edited pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad_seq::{tokenize, TokenSequence, MASK_TOKEN};

/// Matched token positions `(index_in_orig, index_in_edit)`, strictly increasing in both.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Token sequence with `<mask>` placeholders, never two adjacent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub struct MaskedSequence {
    tokens: TokenSequence,
}

impl MaskedSequence {
    /// Builds a masked sequence, merging runs of adjacent masks.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut out: Vec<String> = Vec::new();
        for t in tokens {
            if t == MASK_TOKEN && out.last().is_some_and(|l| l == MASK_TOKEN) {
                continue;
            }
            out.push(t);
        }
        MaskedSequence { tokens: TokenSequence::new(out) }
    }

    pub fn parse(text: &str) -> Self {
        Self::from_tokens(tokenize(text).into_inner())
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn mask_count(&self) -> usize {
        self.tokens.iter().filter(|t| *t == MASK_TOKEN).count()
    }

    pub fn text(&self) -> String {
        self.tokens.join()
    }

    /// Unmasked runs around the masks; always `mask_count() + 1` segments, possibly empty.
    pub fn segments(&self) -> Vec<&[String]> {
        self.tokens.split(|t| t == MASK_TOKEN).collect()
    }
}

impl From<MaskedSequence> for String {
    fn from(m: MaskedSequence) -> String {
        m.text()
    }
}

impl From<String> for MaskedSequence {
    fn from(s: String) -> Self {
        MaskedSequence::parse(&s)
    }
}

impl std::fmt::Display for MaskedSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("{fills} fills supplied for {masks} masks")]
    FillArityMismatch { masks: usize, fills: usize },
}

/// Longest common subsequence by dynamic programming.
///
/// Backtracking from the end skips an original token whenever that keeps the
/// LCS length, then an edited token, and takes a match only when forced. The
/// alignment therefore prefers the earliest matching positions.
pub fn lcs(a: &[String], b: &[String]) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for i in 1..=n {
        for j in 1..=m {
            dp[i * w + j] = if a[i - 1] == b[j - 1] {
                dp[(i - 1) * w + j - 1] + 1
            } else {
                dp[(i - 1) * w + j].max(dp[i * w + j - 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(dp[n * w + m] as usize);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        let here = dp[i * w + j];
        if dp[(i - 1) * w + j] == here {
            i -= 1;
        } else if dp[i * w + j - 1] == here {
            j -= 1;
        } else {
            debug_assert_eq!(a[i - 1], b[j - 1]);
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        }
    }
    pairs.reverse();
    Alignment { pairs }
}

/// Ground-truth mask together with the fills that turn it back into `edit`.
///
/// Each gap between consecutive matched tokens (plus the leading and trailing
/// gaps) that is non-empty on either side becomes one `<mask>`; its fill is the
/// edited tokens of that gap.
pub fn gt_mask_with_fills(orig: &[String], edit: &[String]) -> (MaskedSequence, Vec<TokenSequence>) {
    let alignment = lcs(orig, edit);
    let mut tokens = Vec::with_capacity(orig.len());
    let mut fills = Vec::new();
    let (mut next_o, mut next_e) = (0usize, 0usize);
    let sentinel = (orig.len(), edit.len());
    for &(o, e) in alignment.pairs.iter().chain(std::iter::once(&sentinel)) {
        if o > next_o || e > next_e {
            tokens.push(MASK_TOKEN.to_string());
            fills.push(TokenSequence::new(edit[next_e..e].to_vec()));
        }
        if (o, e) != sentinel {
            tokens.push(orig[o].clone());
        }
        next_o = o + 1;
        next_e = e + 1;
    }
    (MaskedSequence { tokens: TokenSequence::new(tokens) }, fills)
}

/// Ground-truth masked sequence for an original/edited pair.
pub fn make_gt_mask(orig: &[String], edit: &[String]) -> MaskedSequence {
    gt_mask_with_fills(orig, edit).0
}

/// Recovers the fills if `concrete` is `masked` with each mask replaced by some
/// (possibly empty) token run. Unmasked segments must appear verbatim and in order.
pub fn extract_fills(masked: &MaskedSequence, concrete: &[String]) -> Option<Vec<TokenSequence>> {
    let segments = masked.segments();
    let (first, rest) = segments.split_first().expect("split yields at least one segment");
    let Some((last, middle)) = rest.split_last() else {
        return (first == &concrete).then(Vec::new);
    };
    if first.len() + last.len() > concrete.len() || !concrete.starts_with(first) || !concrete.ends_with(last) {
        return None;
    }
    let window_end = concrete.len() - last.len();
    let mut cursor = first.len();
    let mut fills = Vec::with_capacity(segments.len() - 1);
    for seg in middle {
        // leftmost placement keeps the most room for later segments
        let found = concrete[cursor..window_end].windows(seg.len()).position(|w| w == *seg)?;
        fills.push(TokenSequence::new(concrete[cursor..cursor + found].to_vec()));
        cursor += found + seg.len();
    }
    fills.push(TokenSequence::new(concrete[cursor..window_end].to_vec()));
    Some(fills)
}

/// True iff `masked` is `orig` with whole spans replaced by `<mask>`.
pub fn verify_consistency(orig: &[String], masked: &MaskedSequence) -> bool {
    extract_fills(masked, orig).is_some()
}

/// Replaces each mask, in order, by its fill. An empty fill deletes the span.
pub fn realize(masked: &MaskedSequence, fills: &[TokenSequence]) -> Result<TokenSequence, MaskError> {
    let masks = masked.mask_count();
    if masks != fills.len() {
        return Err(MaskError::FillArityMismatch { masks, fills: fills.len() });
    }
    let mut fills = fills.iter();
    let mut out = Vec::with_capacity(masked.tokens.len());
    for t in masked.tokens.iter() {
        if t == MASK_TOKEN {
            out.extend(fills.next().expect("arity checked").iter().cloned());
        } else {
            out.push(t.clone());
        }
    }
    Ok(TokenSequence::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> TokenSequence {
        tokenize(s)
    }

    #[test]
    fn lcs_identical() {
        let a = toks("x y z");
        assert_eq!(lcs(&a, &a).pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn lcs_disjoint() {
        assert!(lcs(&toks("x"), &toks("y")).is_empty());
        assert!(lcs(&toks(""), &toks("y")).is_empty());
    }

    #[test]
    fn lcs_classic_example_has_length_four() {
        let al = lcs(&toks("A B C B D A B"), &toks("B D C A B A"));
        assert_eq!(al.len(), 4);
        let a = toks("A B C B D A B");
        let b = toks("B D C A B A");
        for w in al.pairs.windows(2) {
            assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        assert!(al.pairs.iter().all(|&(i, j)| a[i] == b[j]));
    }

    #[test]
    fn gt_mask_identity() {
        let a = toks("loop line 64 64");
        let m = make_gt_mask(&a, &a);
        assert_eq!(m.tokens(), &a);
        assert_eq!(m.mask_count(), 0);
    }

    #[test]
    fn gt_mask_trailing_insertion() {
        let m = make_gt_mask(&toks("loop line 64 64"), &toks("loop line 64 64 line 96 64"));
        assert_eq!(m.text(), "loop line 64 64 <mask>");
    }

    #[test]
    fn gt_mask_replacement() {
        let (m, fills) = gt_mask_with_fills(&toks("line 64 160"), &toks("line 96 160"));
        assert_eq!(m.text(), "line <mask> 160");
        assert_eq!(fills, vec![toks("96")]);
    }

    #[test]
    fn gt_mask_disjoint_is_single_mask() {
        assert_eq!(make_gt_mask(&toks("a b c"), &toks("x y")).text(), MASK_TOKEN);
        assert_eq!(make_gt_mask(&toks(""), &toks("x")).text(), MASK_TOKEN);
        assert_eq!(make_gt_mask(&toks(""), &toks("")).text(), "");
    }

    #[test]
    fn consistency_examples() {
        let orig = toks("a b c");
        assert!(verify_consistency(&orig, &MaskedSequence::parse("a <mask> c")));
        assert!(!verify_consistency(&orig, &MaskedSequence::parse("c <mask> a")));
        assert!(verify_consistency(&orig, &MaskedSequence::parse("a <mask> b <mask>")));
        assert!(verify_consistency(&orig, &MaskedSequence::parse("a b c")));
        assert!(!verify_consistency(&orig, &MaskedSequence::parse("a c")));
        assert!(!verify_consistency(&orig, &MaskedSequence::parse("a <mask> b c d")));
        assert!(verify_consistency(&orig, &MaskedSequence::parse("<mask>")));
        assert!(!verify_consistency(&orig, &MaskedSequence::parse("a b <mask> b c")));
    }

    #[test]
    fn adjacent_masks_merge() {
        let m = MaskedSequence::parse("a <mask> <mask> b <mask>");
        assert_eq!(m.text(), "a <mask> b <mask>");
        assert_eq!(m.mask_count(), 2);
    }

    #[test]
    fn realize_examples() {
        let m = MaskedSequence::parse("a <mask> c");
        assert_eq!(realize(&m, &[toks("b")]).unwrap(), toks("a b c"));
        assert_eq!(realize(&MaskedSequence::parse("a <mask>"), &[toks("")]).unwrap(), toks("a"));
        assert_eq!(realize(&MaskedSequence::parse("<mask>"), &[toks("x y")]).unwrap(), toks("x y"));
        assert_eq!(realize(&m, &[]).unwrap_err(), MaskError::FillArityMismatch { masks: 1, fills: 0 });
    }

    #[test]
    fn extract_fills_recovers_spans() {
        let m = MaskedSequence::parse("a <mask> c <mask>");
        let fills = extract_fills(&m, &toks("a x y c c z")).unwrap();
        assert_eq!(fills, vec![toks("x y"), toks("c z")]);
        assert_eq!(realize(&m, &fills).unwrap(), toks("a x y c c z"));
    }

    #[test]
    fn serde_as_text() {
        let m = MaskedSequence::parse("a <mask> c");
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"a <mask> c\"");
        assert_eq!(serde_json::from_str::<MaskedSequence>(&json).unwrap(), m);
    }
}
