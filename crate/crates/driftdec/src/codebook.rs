//! The time-varying code `C = (C_0 ... C_{N-1})` and encoding.
//!
//! Codewords are stored packed in machine words (`n <= 64`), in a single
//! flat array with the symbol index innermost, so the decoder engine can
//! index position/symbol pairs contiguously.

use rand::Rng;

use crate::bits::{self, Bit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookMode {
    /// One table of `q` codewords applied to every frame position.
    Invariant,
    /// A distinct table per position.
    Varying,
}

/// The code: per frame position, an injective map from `q`-ary symbols to
/// `n`-bit codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    msg_len: usize,
    word_len: usize,
    alphabet: usize,
    mode: CodebookMode,
    /// Flat `N x q`, symbol index innermost.
    words: Vec<u64>,
}

/// A message of `N` symbols in `[0, q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub symbols: Vec<usize>,
}

impl Codebook {
    fn validate_dims(msg_len: usize, word_len: usize, alphabet: usize) -> Result<()> {
        if msg_len < 1 || word_len < 1 || alphabet < 2 {
            return Err(Error::Codebook(format!(
                "need N >= 1, n >= 1, q >= 2 (got N={msg_len}, n={word_len}, q={alphabet})"
            )));
        }
        if word_len > 64 {
            return Err(Error::Codebook(format!("codeword length {word_len} exceeds supported limit of 64")));
        }
        if word_len < 64 && alphabet as u128 > 1u128 << word_len {
            return Err(Error::Codebook(format!("q = {alphabet} exceeds 2^n = {}", 1u128 << word_len)));
        }
        Ok(())
    }

    fn check_injective(words: &[u64], msg_len: usize, alphabet: usize) -> Result<()> {
        for i in 0..msg_len {
            let table = &words[i * alphabet..(i + 1) * alphabet];
            let mut sorted: Vec<u64> = table.to_vec();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Codebook(format!("duplicate codeword at position {i}")));
            }
        }
        Ok(())
    }

    /// Build from an explicit flat `N x q` table of packed codewords.
    pub fn from_words(msg_len: usize, word_len: usize, alphabet: usize, mode: CodebookMode, words: Vec<u64>) -> Result<Self> {
        Self::validate_dims(msg_len, word_len, alphabet)?;
        if words.len() != msg_len * alphabet {
            return Err(Error::Codebook(format!(
                "table has {} entries, expected N*q = {}",
                words.len(),
                msg_len * alphabet
            )));
        }
        Self::check_injective(&words, msg_len, alphabet)?;
        Ok(Self { msg_len, word_len, alphabet, mode, words })
    }

    /// Per position, `q` distinct `n`-bit words sampled without replacement.
    pub fn random<R: Rng + ?Sized>(msg_len: usize, word_len: usize, alphabet: usize, rng: &mut R) -> Result<Self> {
        Self::validate_dims(msg_len, word_len, alphabet)?;
        let mut words = Vec::with_capacity(msg_len * alphabet);
        let mask: u64 = if word_len == 64 { u64::MAX } else { (1u64 << word_len) - 1 };
        for _ in 0..msg_len {
            let mut chosen = std::collections::HashSet::with_capacity(alphabet);
            while chosen.len() < alphabet {
                let w = rng.gen::<u64>() & mask;
                if chosen.insert(w) {
                    words.push(w);
                }
            }
        }
        Self::from_words(msg_len, word_len, alphabet, CodebookMode::Varying, words)
    }

    pub fn msg_len(&self) -> usize {
        self.msg_len
    }
    pub fn word_len(&self) -> usize {
        self.word_len
    }
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }
    pub fn mode(&self) -> CodebookMode {
        self.mode
    }

    /// Frame length in channel bits, `tau = n * N`.
    pub fn frame_len(&self) -> usize {
        self.msg_len * self.word_len
    }

    /// The flat table, indexable as `flatten()[i * q + d]`.
    pub fn flatten(&self) -> &[u64] {
        &self.words
    }

    pub fn word(&self, position: usize, symbol: usize) -> u64 {
        self.words[position * self.alphabet + symbol]
    }

    pub fn word_bits(&self, position: usize, symbol: usize) -> Vec<Bit> {
        bits::unpack(self.word(position, symbol), self.word_len)
    }

    /// Concatenate the per-position codewords: `C_0(D_0) || ... || C_{N-1}(D_{N-1})`.
    pub fn encode(&self, msg: &Message) -> Result<Vec<Bit>> {
        if msg.symbols.len() != self.msg_len {
            return Err(Error::DimensionMismatch(format!(
                "message has {} symbols, codebook expects {}",
                msg.symbols.len(),
                self.msg_len
            )));
        }
        let mut out = Vec::with_capacity(self.frame_len());
        for (i, &d) in msg.symbols.iter().enumerate() {
            if d >= self.alphabet {
                return Err(Error::DimensionMismatch(format!("symbol {d} at position {i} exceeds q = {}", self.alphabet)));
            }
            out.extend_from_slice(&self.word_bits(i, d));
        }
        Ok(out)
    }

    /// Parse the text format: header `N n q mode` with mode `invariant` or
    /// `varying`, then `q` (invariant) or `N*q` (varying) lines of `n`-bit
    /// binary strings, symbol order `D = 0..q-1` per position.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let header = lines.next().ok_or_else(|| Error::Codebook("empty codebook file".into()))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 4 {
            return Err(Error::Codebook(format!("header must be \"N n q mode\", got {header:?}")));
        }
        let msg_len: usize = fields[0].parse().map_err(|_| Error::Codebook(format!("bad N {:?}", fields[0])))?;
        let word_len: usize = fields[1].parse().map_err(|_| Error::Codebook(format!("bad n {:?}", fields[1])))?;
        let alphabet: usize = fields[2].parse().map_err(|_| Error::Codebook(format!("bad q {:?}", fields[2])))?;
        let mode = match fields[3] {
            "invariant" => CodebookMode::Invariant,
            "varying" => CodebookMode::Varying,
            other => return Err(Error::Codebook(format!("unknown mode {other:?}"))),
        };
        Self::validate_dims(msg_len, word_len, alphabet)?;
        let rows = match mode {
            CodebookMode::Invariant => alphabet,
            CodebookMode::Varying => msg_len * alphabet,
        };
        let mut table = Vec::with_capacity(rows);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Codebook(format!("expected {rows} codeword rows, got {r}")))?;
            if line.len() != word_len {
                return Err(Error::Codebook(format!("row {r} has {} characters, expected n = {word_len}", line.len())));
            }
            let bits = bits::from_str(line).map_err(|_| Error::Codebook(format!("non-binary characters in row {r}")))?;
            table.push(bits::pack(&bits));
        }
        if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
            return Err(Error::Codebook(format!("unexpected trailing content {extra:?}")));
        }
        let words = match mode {
            CodebookMode::Invariant => {
                let mut w = Vec::with_capacity(msg_len * alphabet);
                for _ in 0..msg_len {
                    w.extend_from_slice(&table);
                }
                w
            }
            CodebookMode::Varying => table,
        };
        Self::from_words(msg_len, word_len, alphabet, mode, words)
    }

    /// Serialize in the format accepted by [`Codebook::parse`].
    pub fn serialize(&self) -> String {
        let mode = match self.mode {
            CodebookMode::Invariant => "invariant",
            CodebookMode::Varying => "varying",
        };
        let mut out = format!("{} {} {} {}\n", self.msg_len, self.word_len, self.alphabet, mode);
        let rows = match self.mode {
            CodebookMode::Invariant => &self.words[..self.alphabet],
            CodebookMode::Varying => &self.words[..],
        };
        for &w in rows {
            out.push_str(&bits::to_string(&bits::unpack(w, self.word_len)));
            out.push('\n');
        }
        out
    }
}

impl Message {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    pub fn random<R: Rng + ?Sized>(msg_len: usize, alphabet: usize, rng: &mut R) -> Self {
        Self { symbols: (0..msg_len).map(|_| rng.gen_range(0..alphabet)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::setup_rng;
    use proptest::prelude::*;

    fn repetition_cb(msg_len: usize) -> Codebook {
        // table[i] = {0: 00, 1: 11}
        Codebook::from_words(msg_len, 2, 2, CodebookMode::Invariant, vec![0b00, 0b11].repeat(msg_len)).unwrap()
    }

    #[test]
    fn encode_concatenates() {
        let cb = repetition_cb(2);
        let frame = cb.encode(&Message::new(vec![1, 0])).unwrap();
        assert_eq!(frame, vec![1, 1, 0, 0]);
    }

    #[test]
    fn encode_single_position() {
        let cb = repetition_cb(1);
        assert_eq!(cb.encode(&Message::new(vec![1])).unwrap(), cb.word_bits(0, 1));
    }

    #[test]
    fn encode_length_and_injectivity() {
        let mut rng = setup_rng(5);
        let cb = Codebook::random(210, 10, 32, &mut rng).unwrap();
        let msg = Message::random(210, 32, &mut rng);
        assert_eq!(cb.encode(&msg).unwrap().len(), 2100);

        let other = Message::random(210, 32, &mut rng);
        if msg != other {
            assert_ne!(cb.encode(&msg).unwrap(), cb.encode(&other).unwrap());
        }
    }

    #[test]
    fn random_full_alphabet_is_permutation() {
        let mut rng = setup_rng(9);
        let cb = Codebook::random(1, 2, 4, &mut rng).unwrap();
        let mut words: Vec<u64> = cb.flatten().to_vec();
        words.sort_unstable();
        assert_eq!(words, vec![0b00, 0b01, 0b10, 0b11]);
    }

    #[test]
    fn parse_invariant_repeats_table() {
        let cb = Codebook::parse("3 2 2 invariant\n00\n11\n").unwrap();
        assert_eq!(cb.flatten().len(), 6);
        assert_eq!(cb.word(2, 1), 0b11);
        // CR line endings accepted.
        let crlf = Codebook::parse("3 2 2 invariant\r\n00\r\n11\r\n").unwrap();
        assert_eq!(cb.flatten(), crlf.flatten());
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(Codebook::parse("").is_err());
        assert!(Codebook::parse("1 2 2 invariant\n00\n00\n").is_err(), "duplicate codewords");
        assert!(Codebook::parse("1 2 2 invariant\n00\n").is_err(), "row count");
        assert!(Codebook::parse("1 2 2 invariant\n0x\n11\n").is_err(), "non-binary");
        assert!(Codebook::parse("1 2 8 invariant\n").is_err(), "q > 2^n");
    }

    #[test]
    fn flatten_matches_indexed_access() {
        let mut rng = setup_rng(11);
        let cb = Codebook::random(4, 5, 8, &mut rng).unwrap();
        for i in 0..4 {
            for d in 0..8 {
                assert_eq!(cb.flatten()[i * 8 + d], cb.word(i, d));
            }
        }
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(seed in 0u64..500, msg_len in 1usize..5, word_len in 1usize..8) {
            let mut rng = setup_rng(seed);
            let max_q = 1usize << word_len.min(4);
            let q = 2 + (seed as usize) % (max_q.max(3) - 2);
            if q <= (1 << word_len) {
                let cb = Codebook::random(msg_len, word_len, q, &mut rng).unwrap();
                let back = Codebook::parse(&cb.serialize()).unwrap();
                prop_assert_eq!(cb, back);
            }
        }
    }
}
