//! Text to motif: emotion coordinates, rule-based feature mapping, and
//! random one-bar motif synthesis.
//!
//! Valence and arousal live on a 1..9 scale. The mode rule is taken as
//! written: valence at or below the midpoint selects major, so low valence
//! reads as the positive end of the axis. `invert_valence_mode` flips it.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::process::{Command, Stdio};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clip::{Clip, MotifLabel, NoteEvent, TICKS_PER_BAR, TICKS_PER_BEAT, BEATS_PER_BAR};

pub const VALENCE_RANGE: (f64, f64) = (1.0, 9.0);
pub const AROUSAL_MAX: f64 = 9.0;
pub const NEUTRAL: VaPoint = VaPoint { valence: 5.0, arousal: 5.0 };
pub const MODE_THRESHOLD: f64 = 5.0;
pub const ND_MARGINS: [f64; 4] = [0.0, 3.5, 5.0, 8.0];
pub const NAD_MARGINS: [f64; 4] = [0.0, 0.8, 1.2, 2.0];
pub const MAJOR_OFFSETS: [u8; 8] = [0, 2, 4, 5, 7, 9, 11, 12];
pub const MINOR_OFFSETS: [u8; 8] = [0, 2, 3, 5, 7, 8, 10, 12];
/// Eighth note, the unit used to pad durations up to a full bar.
pub const PAD_TICKS: u32 = 2;
pub const MIN_NOTES: usize = 2;
/// One onset per sixteenth is the densest a bar can hold.
pub const MAX_NOTES: usize = TICKS_PER_BAR as usize;

#[derive(Debug, Error, PartialEq)]
pub enum TtmmError {
    #[error("input text is empty")]
    EmptyText,
    #[error("valence {0} outside [1, 9]")]
    Valence(f64),
    #[error("arousal {0} outside (0, 9]")]
    Arousal(f64),
    #[error("VA provider `{provider}` failed: {reason}")]
    Provider { provider: String, reason: String },
    #[error("cannot parse `{0}` as a key such as C4 or F#3")]
    Key(String),
    #[error("cannot parse `{0}` as `valence,arousal`")]
    VaSyntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaPoint {
    pub valence: f64,
    pub arousal: f64,
}

impl VaPoint {
    pub fn new(valence: f64, arousal: f64) -> Result<Self, TtmmError> {
        if !(VALENCE_RANGE.0..=VALENCE_RANGE.1).contains(&valence) {
            return Err(TtmmError::Valence(valence));
        }
        if !(arousal > 0.0 && arousal <= AROUSAL_MAX) {
            return Err(TtmmError::Arousal(arousal));
        }
        Ok(Self { valence, arousal })
    }

    /// Arousal bin 1..=3.
    pub fn arousal_bin(&self) -> usize {
        ((self.arousal / 3.0).ceil() as usize).clamp(1, 3)
    }
}

impl FromStr for VaPoint {
    type Err = TtmmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (v, a) = s.split_once(',').ok_or_else(|| TtmmError::VaSyntax(s.into()))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| TtmmError::VaSyntax(s.into()));
        VaPoint::new(parse(v)?, parse(a)?)
    }
}

/// Something that reads emotion coordinates out of text.
pub trait VaProvider {
    fn name(&self) -> &str;
    fn valence_arousal(&self, text: &str) -> Result<VaPoint, TtmmError>;
}

/// Returns a fixed point regardless of the text.
pub struct BypassProvider(pub VaPoint);

impl VaProvider for BypassProvider {
    fn name(&self) -> &str {
        "bypass"
    }

    fn valence_arousal(&self, _text: &str) -> Result<VaPoint, TtmmError> {
        Ok(self.0)
    }
}

/// Averages the coordinates of every lexicon word found in the text.
pub struct LexiconProvider {
    entries: HashMap<String, VaPoint>,
}

const BUILTIN_LEXICON: &[(&str, f64, f64)] = &[
    ("happy", 2.0, 7.0),
    ("joy", 2.0, 6.5),
    ("cheerful", 2.5, 6.5),
    ("love", 2.5, 5.0),
    ("sweet", 3.0, 4.0),
    ("calm", 3.5, 2.0),
    ("peaceful", 3.0, 1.5),
    ("relaxing", 3.5, 2.0),
    ("excited", 2.5, 8.5),
    ("energetic", 3.0, 8.5),
    ("dance", 3.0, 8.0),
    ("sad", 7.5, 2.5),
    ("lonely", 7.5, 3.0),
    ("melancholy", 7.0, 3.0),
    ("heartbroken", 8.0, 4.0),
    ("angry", 7.5, 8.0),
    ("tense", 6.5, 7.5),
    ("fear", 7.5, 7.0),
];

impl LexiconProvider {
    pub fn builtin() -> Self {
        let entries = BUILTIN_LEXICON
            .iter()
            .map(|&(w, v, a)| (w.to_string(), VaPoint { valence: v, arousal: a }))
            .collect();
        Self { entries }
    }

    /// Reads `word<TAB>valence<TAB>arousal` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self, TtmmError> {
        let mut entries = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |why: &str| TtmmError::Provider {
                provider: "lexicon".into(),
                reason: format!("line {}: {why}", n + 1),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected word, valence, arousal"));
            }
            let v: f64 = cols[1].trim().parse().map_err(|_| bad("bad valence"))?;
            let a: f64 = cols[2].trim().parse().map_err(|_| bad("bad arousal"))?;
            let point = VaPoint::new(v, a).map_err(|e| bad(&e.to_string()))?;
            entries.insert(cols[0].trim().to_lowercase(), point);
        }
        Ok(Self { entries })
    }
}

impl VaProvider for LexiconProvider {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn valence_arousal(&self, text: &str) -> Result<VaPoint, TtmmError> {
        let hits: Vec<&VaPoint> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .filter_map(|w| self.entries.get(&w.to_lowercase()))
            .collect();
        if hits.is_empty() {
            return Ok(NEUTRAL);
        }
        let n = hits.len() as f64;
        Ok(VaPoint {
            valence: hits.iter().map(|p| p.valence).sum::<f64>() / n,
            arousal: hits.iter().map(|p| p.arousal).sum::<f64>() / n,
        })
    }
}

/// Runs an external program with the text on stdin and reads
/// `valence,arousal` from the first line of its stdout.
pub struct CommandProvider {
    pub program: String,
    pub args: Vec<String>,
}

impl VaProvider for CommandProvider {
    fn name(&self) -> &str {
        "external"
    }

    fn valence_arousal(&self, text: &str) -> Result<VaPoint, TtmmError> {
        let fail = |reason: String| TtmmError::Provider { provider: "external".into(), reason };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("cannot start `{}`: {e}", self.program)))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(text.as_bytes())
            .map_err(|e| fail(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        if !out.status.success() {
            return Err(fail(format!("exited with {}", out.status)));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let first = stdout.lines().next().unwrap_or("").replace(char::is_whitespace, ",");
        let first = first.split(',').filter(|s| !s.is_empty()).collect::<Vec<_>>().join(",");
        first.parse::<VaPoint>().map_err(|e| fail(e.to_string()))
    }
}

pub fn text_to_va(text: &str, provider: &dyn VaProvider) -> Result<VaPoint, TtmmError> {
    if text.trim().is_empty() {
        return Err(TtmmError::EmptyText);
    }
    let point = provider.valence_arousal(text)?;
    VaPoint::new(point.valence, point.arousal).map_err(|e| TtmmError::Provider {
        provider: provider.name().to_string(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Major,
    Minor,
}

impl Mode {
    pub fn offsets(self) -> &'static [u8; 8] {
        match self {
            Mode::Major => &MAJOR_OFFSETS,
            Mode::Minor => &MINOR_OFFSETS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MusicalFeatures {
    pub mode: Mode,
    /// Notes per beat.
    pub nd: f64,
    /// Average note length in beats.
    pub nad: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub invert_valence_mode: bool,
}

/// Uniform draw from the half-open interval `(lo, hi]`.
fn sample_upper_closed<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    hi - rng.gen::<f64>() * (hi - lo)
}

/// The `(lo, hi]` bins for note density and note length selected by arousal.
pub fn feature_bins(va: &VaPoint) -> ((f64, f64), (f64, f64)) {
    let idx = va.arousal_bin();
    ((ND_MARGINS[idx - 1], ND_MARGINS[idx]), (NAD_MARGINS[3 - idx], NAD_MARGINS[4 - idx]))
}

pub fn mode_for(valence: f64, config: &FeatureConfig) -> Mode {
    let major = valence <= MODE_THRESHOLD;
    if major != config.invert_valence_mode {
        Mode::Major
    } else {
        Mode::Minor
    }
}

pub fn va_to_features<R: Rng + ?Sized>(
    va: &VaPoint,
    config: &FeatureConfig,
    rng: &mut R,
) -> Result<MusicalFeatures, TtmmError> {
    let va = VaPoint::new(va.valence, va.arousal)?;
    let ((nd_lo, nd_hi), (nad_lo, nad_hi)) = feature_bins(&va);
    Ok(MusicalFeatures {
        mode: mode_for(va.valence, config),
        nd: sample_upper_closed(rng, nd_lo, nd_hi),
        nad: sample_upper_closed(rng, nad_lo, nad_hi),
    })
}

/// Tonic as a MIDI pitch, written like `C4` (= 60), `F#3` or `Bb4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Key(pub u8);

impl Key {
    pub fn midi(self) -> u8 {
        self.0
    }
}

impl Default for Key {
    fn default() -> Self {
        Key(60)
    }
}

impl FromStr for Key {
    type Err = TtmmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TtmmError::Key(s.to_string());
        let mut chars = s.trim().chars();
        let letter = chars.next().ok_or_else(err)?.to_ascii_uppercase();
        let mut pc: i32 = match letter {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return Err(err()),
        };
        let rest: String = chars.collect();
        let octave_str = match rest.chars().next() {
            Some('#') => {
                pc += 1;
                &rest[1..]
            }
            Some('b') => {
                pc -= 1;
                &rest[1..]
            }
            _ => &rest[..],
        };
        let octave: i32 = octave_str.parse().map_err(|_| err())?;
        let midi = (octave + 1) * 12 + pc;
        // The scale reaches an octave above the tonic.
        if !(0..=115).contains(&midi) {
            return Err(err());
        }
        Ok(Key(midi as u8))
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
        write!(f, "{}{}", NAMES[self.0 as usize % 12], self.0 as i32 / 12 - 1)
    }
}

/// What went into a synthesized motif, for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSpec {
    pub key: Key,
    pub non: usize,
    pub scale: [u8; 8],
    pub pitches: Vec<u8>,
    pub durations: Vec<u32>,
}

pub fn scale_for(key: Key, mode: Mode) -> [u8; 8] {
    mode.offsets().map(|o| key.midi() + o)
}

/// Number of notes: density times four beats, rounded, at least two and at
/// most one per sixteenth.
pub fn note_count(nd: f64) -> usize {
    ((nd * BEATS_PER_BAR as f64).round() as usize).clamp(MIN_NOTES, MAX_NOTES)
}

pub fn motif_spec<R: Rng + ?Sized>(features: &MusicalFeatures, key: Key, rng: &mut R) -> MotifSpec {
    let non = note_count(features.nd);
    let scale = scale_for(key, features.mode);
    let pitches: Vec<u8> = (0..non).map(|_| scale[rng.gen_range(0..scale.len())]).collect();

    let base = ((features.nad * TICKS_PER_BEAT as f64).round() as u32).max(1);
    let mut durations = vec![base; non];
    let mut total: u32 = durations.iter().sum();
    while total > TICKS_PER_BAR {
        let shrinkable: Vec<usize> = (0..non).filter(|&i| durations[i] > 1).collect();
        let i = shrinkable[rng.gen_range(0..shrinkable.len())];
        durations[i] -= 1;
        total -= 1;
    }
    while total < TICKS_PER_BAR {
        let add = PAD_TICKS.min(TICKS_PER_BAR - total);
        durations[rng.gen_range(0..non)] += add;
        total += add;
    }
    MotifSpec { key, non, scale, pitches, durations }
}

impl MotifSpec {
    /// One bar, notes back to back, labeled as a motif over the whole bar.
    pub fn to_clip(&self) -> Clip {
        let mut t = 0;
        let notes = self
            .pitches
            .iter()
            .zip(&self.durations)
            .map(|(&p, &d)| {
                let n = NoteEvent::new(t, d, p);
                t += d;
                n
            })
            .collect();
        Clip::with_bars(1, notes, vec![], vec![MotifLabel::new(0, TICKS_PER_BAR)], vec![])
            .expect("durations fill exactly one bar")
    }
}

pub fn features_to_motif<R: Rng + ?Sized>(features: &MusicalFeatures, key: Key, rng: &mut R) -> Clip {
    motif_spec(features, key, rng).to_clip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bypass_returns_its_point() {
        let p: VaPoint = "3,8".parse().unwrap();
        assert_eq!(text_to_va("anything", &BypassProvider(p)).unwrap(), VaPoint { valence: 3.0, arousal: 8.0 });
    }

    #[test]
    fn lexicon_single_hit_and_fallback() {
        let lex = LexiconProvider::builtin();
        assert_eq!(text_to_va("so SAD today", &lex).unwrap(), VaPoint { valence: 7.5, arousal: 2.5 });
        assert_eq!(text_to_va("the quick brown fox", &lex).unwrap(), NEUTRAL);
        assert_eq!(text_to_va("   ", &lex).unwrap_err(), TtmmError::EmptyText);
    }

    #[test]
    fn lexicon_averages() {
        let lex = LexiconProvider::from_tsv("# test\nup\t2\t8\ndown\t8\t2\n").unwrap();
        assert_eq!(lex.valence_arousal("up and down").unwrap(), VaPoint { valence: 5.0, arousal: 5.0 });
        assert!(LexiconProvider::from_tsv("x\t1\n").is_err());
    }

    #[test]
    fn feature_bins_by_arousal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = va_to_features(&VaPoint { valence: 3.0, arousal: 8.0 }, &FeatureConfig::default(), &mut rng).unwrap();
        assert_eq!(f.mode, Mode::Major);
        assert!(f.nd > 5.0 && f.nd <= 8.0 && f.nad > 0.0 && f.nad <= 0.8);
        let f = va_to_features(&VaPoint { valence: 7.0, arousal: 2.0 }, &FeatureConfig::default(), &mut rng).unwrap();
        assert_eq!(f.mode, Mode::Minor);
        assert!(f.nd > 0.0 && f.nd <= 3.5 && f.nad > 1.2 && f.nad <= 2.0);
        let boundary = VaPoint { valence: 5.0, arousal: 3.0 };
        assert_eq!(boundary.arousal_bin(), 1);
        assert_eq!(va_to_features(&boundary, &FeatureConfig::default(), &mut rng).unwrap().mode, Mode::Major);
        let inverted = FeatureConfig { invert_valence_mode: true };
        assert_eq!(va_to_features(&boundary, &inverted, &mut rng).unwrap().mode, Mode::Minor);
    }

    #[test]
    fn arousal_range_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for a in [0.0, -1.0, 9.01] {
            let err = va_to_features(&VaPoint { valence: 5.0, arousal: a }, &FeatureConfig::default(), &mut rng);
            assert_eq!(err.unwrap_err(), TtmmError::Arousal(a));
        }
    }

    #[test]
    fn d_major_scale() {
        let key: Key = "D4".parse().unwrap();
        assert_eq!(key.midi(), 62);
        assert_eq!(scale_for(key, Mode::Major), [62, 64, 66, 67, 69, 71, 73, 74]);
        let f = MusicalFeatures { mode: Mode::Major, nd: 2.0, nad: 0.5 };
        let spec = motif_spec(&f, key, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(spec.non, 8);
    }

    #[test]
    fn sparse_motif_still_has_two_notes() {
        assert_eq!(note_count(0.25), 2);
        assert_eq!(note_count(0.01), 2);
        assert_eq!(note_count(8.0), 16);
    }

    #[test]
    fn key_names() {
        assert_eq!("C4".parse::<Key>().unwrap().midi(), 60);
        assert_eq!("F#3".parse::<Key>().unwrap().midi(), 54);
        assert_eq!("Bb4".parse::<Key>().unwrap().midi(), 70);
        assert_eq!(Key(61).to_string(), "C#4");
        assert!("H2".parse::<Key>().is_err());
    }

    #[test]
    fn external_provider_reads_stdout() {
        let p = CommandProvider { program: "sh".into(), args: vec!["-c".into(), "cat >/dev/null; echo 2.5 6".into()] };
        assert_eq!(text_to_va("hello", &p).unwrap(), VaPoint { valence: 2.5, arousal: 6.0 });
        let broken = CommandProvider { program: "/nonexistent/ter".into(), args: vec![] };
        assert!(matches!(text_to_va("hello", &broken), Err(TtmmError::Provider { .. })));
    }
}
