//! Standard MIDI File reading and writing.
//!
//! Track naming convention: `melody`, `chord`, `motif`, `variant_1` ..
//! `variant_5`. Each label region is one note on its label track spanning
//! `[start, end)`. Chords are written as root-position block chords with the
//! root in octave 3.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::clip::{ChordQuality, Clip, ClipError, VariantType, TICKS_PER_BEAT};
use crate::quantize::{quantize_clip, RawChord, RawClip, RawNote, RawRegion};

/// Pulses per quarter note used by [`write_midi`].
pub const WRITE_DIVISION: u16 = 480;
const PULSES_PER_TICK: u32 = WRITE_DIVISION as u32 / TICKS_PER_BEAT;
const CHORD_BASE: u8 = 48;
const LABEL_PITCH: u8 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum MidiError {
    #[error("malformed MIDI at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported time signature {num}/{den}; only 4/4 is accepted")]
    TimeSignature { num: u8, den: u32 },
    #[error("SMPTE time division is not supported")]
    SmpteDivision,
    #[error("unrecognized chord on chord track at tick {tick:.2}: pitches {pitches:?}")]
    UnknownChord { tick: f64, pitches: Vec<u8> },
    #[error("invalid clip: {0}")]
    Invalid(#[from] ClipError),
}

fn malformed(offset: usize, reason: impl Into<String>) -> MidiError {
    MidiError::Malformed { offset, reason: reason.into() }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.pos + n > self.bytes.len() {
            return Err(malformed(self.pos, format!("unexpected end of data (need {n} bytes)")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(malformed(start, "variable-length quantity longer than 4 bytes"))
    }
}

#[derive(Debug, Default)]
struct TrackData {
    name: Option<String>,
    /// (start pulse, end pulse, pitch, velocity)
    notes: Vec<(u64, u64, u8, u8)>,
    end: u64,
}

fn read_track(r: &mut Reader<'_>, len: usize) -> Result<TrackData, MidiError> {
    let end_pos = r.pos + len;
    if end_pos > r.bytes.len() {
        return Err(malformed(r.pos, format!("track length {len} exceeds file size")));
    }
    let mut track = TrackData::default();
    let mut now: u64 = 0;
    let mut running: Option<u8> = None;
    let mut open: HashMap<(u8, u8), VecDeque<(u64, u8)>> = HashMap::new();

    while r.pos < end_pos {
        now += r.vlq()? as u64;
        let status_pos = r.pos;
        let mut status = r.u8()?;
        let first_data = if status < 0x80 {
            let rs = running.ok_or_else(|| malformed(status_pos, "data byte without running status"))?;
            let d = status;
            status = rs;
            Some(d)
        } else {
            None
        };
        match status {
            0xff => {
                let kind = r.u8()?;
                let mlen = r.vlq()? as usize;
                let data = r.take(mlen)?;
                match kind {
                    0x03 => track.name = Some(String::from_utf8_lossy(data).trim().to_string()),
                    0x58 => {
                        if mlen < 2 {
                            return Err(malformed(status_pos, "short time signature event"));
                        }
                        let (num, den) = (data[0], 1u32 << data[1].min(31));
                        if (num, den) != (4, 4) {
                            return Err(MidiError::TimeSignature { num, den });
                        }
                    }
                    0x2f => {
                        track.end = now;
                        break;
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                let slen = r.vlq()? as usize;
                r.take(slen)?;
            }
            0x80..=0xef => {
                running = Some(status);
                let kind = status & 0xf0;
                let channel = status & 0x0f;
                let a = match first_data {
                    Some(d) => d,
                    None => r.u8()?,
                };
                let b = if matches!(kind, 0xc0 | 0xd0) { 0 } else { r.u8()? };
                if a > 127 || b > 127 {
                    return Err(malformed(status_pos, "data byte has its high bit set"));
                }
                match kind {
                    0x90 if b > 0 => open.entry((channel, a)).or_default().push_back((now, b)),
                    0x80 | 0x90 => {
                        if let Some((start, vel)) = open.get_mut(&(channel, a)).and_then(VecDeque::pop_front) {
                            track.notes.push((start, now, a, vel));
                        }
                    }
                    _ => {}
                }
            }
            _ => return Err(malformed(status_pos, format!("unexpected status byte {status:#04x}"))),
        }
    }
    if r.pos > end_pos {
        return Err(malformed(end_pos, "event runs past the end of its track"));
    }
    r.pos = end_pos;
    track.end = track.end.max(now);
    // Hanging notes end at the track end.
    for ((_, pitch), starts) in open {
        for (start, vel) in starts {
            track.notes.push((start, track.end.max(start), pitch, vel));
        }
    }
    track.notes.sort();
    Ok(track)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TrackRole {
    Melody,
    Chord,
    Motif,
    Variant(VariantType),
    Other,
}

fn role_of(name: Option<&str>) -> TrackRole {
    match name {
        Some("melody") => TrackRole::Melody,
        Some("chord") => TrackRole::Chord,
        Some("motif") => TrackRole::Motif,
        Some(n) => n
            .strip_prefix("variant_")
            .and_then(|j| j.parse::<u8>().ok())
            .and_then(VariantType::from_number)
            .map_or(TrackRole::Other, TrackRole::Variant),
        None => TrackRole::Other,
    }
}

/// Reads a Standard MIDI File into fractional ticks without quantizing.
pub fn parse_midi_raw(bytes: &[u8]) -> Result<RawClip, MidiError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != b"MThd" {
        return Err(malformed(0, "missing MThd header"));
    }
    let hlen = r.u32()? as usize;
    if hlen < 6 {
        return Err(malformed(4, "header chunk shorter than 6 bytes"));
    }
    let format = r.u16()?;
    let ntracks = r.u16()?;
    let division = r.u16()?;
    r.take(hlen - 6)?;
    if format > 1 {
        return Err(malformed(8, format!("SMF format {format} is not supported")));
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::SmpteDivision);
    }
    if division == 0 {
        return Err(malformed(12, "zero ticks per quarter note"));
    }

    let mut tracks = Vec::with_capacity(ntracks as usize);
    while tracks.len() < ntracks as usize {
        let chunk_pos = r.pos;
        let id = r.take(4)?;
        let len = r.u32()? as usize;
        if id == b"MTrk" {
            tracks.push(read_track(&mut r, len)?);
        } else {
            r.take(len).map_err(|_| malformed(chunk_pos, "truncated unknown chunk"))?;
        }
    }

    let scale = TICKS_PER_BEAT as f64 / division as f64;
    let to_ticks = |p: u64| p as f64 * scale;
    let mut roles: Vec<TrackRole> = tracks.iter().map(|t| role_of(t.name.as_deref())).collect();
    if !roles.contains(&TrackRole::Melody) {
        if let Some(i) = (0..tracks.len()).find(|&i| roles[i] == TrackRole::Other && !tracks[i].notes.is_empty()) {
            roles[i] = TrackRole::Melody;
        }
    }

    let mut raw = RawClip {
        end: tracks.iter().map(|t| to_ticks(t.end)).fold(0.0, f64::max),
        ..Default::default()
    };
    for (track, role) in tracks.iter().zip(&roles) {
        match role {
            TrackRole::Melody => {
                for &(s, e, pitch, velocity) in &track.notes {
                    raw.melody.push(RawNote { start: to_ticks(s), duration: to_ticks(e - s), pitch, velocity });
                }
                let mut overlaps = Vec::new();
                for w in track.notes.windows(2) {
                    if w[1].0 < w[0].1 {
                        overlaps.push((pulse_note(w[0], scale), pulse_note(w[1], scale)));
                    }
                }
                if !overlaps.is_empty() {
                    return Err(ClipError::Polyphonic(overlaps).into());
                }
            }
            TrackRole::Chord => raw.chords.extend(read_chords(&track.notes, scale)?),
            TrackRole::Motif => raw.motifs.extend(track.notes.iter().map(|&(s, e, ..)| RawRegion {
                start: to_ticks(s),
                end: to_ticks(e),
            })),
            TrackRole::Variant(kind) => raw.variants.extend(track.notes.iter().map(|&(s, e, ..)| {
                (*kind, RawRegion { start: to_ticks(s), end: to_ticks(e) })
            })),
            TrackRole::Other => {}
        }
    }
    Ok(raw)
}

fn pulse_note(n: (u64, u64, u8, u8), scale: f64) -> crate::clip::NoteEvent {
    crate::clip::NoteEvent {
        start: (n.0 as f64 * scale).round() as u32,
        duration: ((n.1 - n.0) as f64 * scale).round().max(1.0) as u32,
        pitch: n.2,
        velocity: n.3,
    }
}

fn read_chords(notes: &[(u64, u64, u8, u8)], scale: f64) -> Result<Vec<RawChord>, MidiError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < notes.len() {
        let onset = notes[i].0;
        let mut j = i;
        while j < notes.len() && notes[j].0 == onset {
            j += 1;
        }
        let group = &notes[i..j];
        let end = group.iter().map(|n| n.1).max().unwrap_or(onset);
        let mut pitches: Vec<u8> = group.iter().map(|n| n.2).collect();
        pitches.sort_unstable();
        pitches.dedup();
        let (root, quality) = identify_chord(&pitches).ok_or_else(|| MidiError::UnknownChord {
            tick: onset as f64 * scale,
            pitches: pitches.clone(),
        })?;
        out.push(RawChord {
            start: onset as f64 * scale,
            duration: (end - onset) as f64 * scale,
            root,
            quality,
        });
        i = j;
    }
    Ok(out)
}

/// Finds a root/quality for a pitch set, preferring the lowest note as root.
fn identify_chord(pitches: &[u8]) -> Option<(u8, ChordQuality)> {
    let classes: Vec<u8> = pitches.iter().map(|p| p % 12).collect();
    for &root in &classes {
        let mut iv: Vec<u8> = classes.iter().map(|c| (c + 12 - root) % 12).collect();
        iv.sort_unstable();
        iv.dedup();
        if let Some(q) = ChordQuality::from_intervals(&iv) {
            return Some((root, q));
        }
    }
    None
}

/// Parses and quantizes a Standard MIDI File.
pub fn parse_midi(bytes: &[u8]) -> Result<Clip, MidiError> {
    Ok(quantize_clip(&parse_midi_raw(bytes)?))
}

fn push_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

struct TrackWriter {
    events: Vec<(u32, u8, Vec<u8>)>,
    name: String,
}

impl TrackWriter {
    fn new(name: &str) -> Self {
        Self { events: Vec::new(), name: name.to_string() }
    }

    fn note(&mut self, channel: u8, start: u32, end: u32, pitch: u8, velocity: u8) {
        // Sort key 1 puts note-on after note-off at the same time.
        self.events.push((start * PULSES_PER_TICK, 1, vec![0x90 | channel, pitch, velocity]));
        self.events.push((end * PULSES_PER_TICK, 0, vec![0x80 | channel, pitch, 0]));
    }

    fn finish(mut self, end_tick: u32, time_signature: bool) -> Vec<u8> {
        let mut body = Vec::new();
        push_vlq(&mut body, 0);
        body.extend([0xff, 0x03]);
        push_vlq(&mut body, self.name.len() as u32);
        body.extend(self.name.as_bytes());
        if time_signature {
            push_vlq(&mut body, 0);
            body.extend([0xff, 0x58, 0x04, TIME_SIG_NUM, 0x02, 0x18, 0x08]);
        }
        self.events.sort_by_key(|e| (e.0, e.1));
        let mut now = 0;
        for (t, _, data) in &self.events {
            push_vlq(&mut body, t - now);
            body.extend(data);
            now = *t;
        }
        let end = (end_tick * PULSES_PER_TICK).max(now);
        push_vlq(&mut body, end - now);
        body.extend([0xff, 0x2f, 0x00]);

        let mut chunk = b"MTrk".to_vec();
        chunk.extend((body.len() as u32).to_be_bytes());
        chunk.extend(body);
        chunk
    }
}

const TIME_SIG_NUM: u8 = crate::clip::TIME_SIGNATURE.0;

/// Writes a format-1 file: melody first, then chord and label tracks that
/// have content. An empty clip becomes a header with no tracks.
pub fn write_midi(clip: &Clip) -> Vec<u8> {
    let mut tracks: Vec<Vec<u8>> = Vec::new();
    if !clip.is_empty() {
        let span = clip.span();
        let mut melody = TrackWriter::new("melody");
        for n in clip.melody() {
            melody.note(0, n.start, n.end(), n.pitch, n.velocity);
        }
        tracks.push(melody.finish(span, true));

        if !clip.chords().is_empty() {
            let mut chord = TrackWriter::new("chord");
            for c in clip.chords() {
                for iv in c.quality.intervals() {
                    chord.note(1, c.start, c.end(), CHORD_BASE + c.root + iv, 80);
                }
            }
            tracks.push(chord.finish(span, false));
        }
        if !clip.motif_labels().is_empty() {
            let mut motif = TrackWriter::new("motif");
            for m in clip.motif_labels() {
                motif.note(0, m.start, m.end, LABEL_PITCH, 100);
            }
            tracks.push(motif.finish(span, false));
        }
        for kind in VariantType::ALL {
            let regions: Vec<_> = clip.variant_labels().iter().filter(|v| v.kind == kind).collect();
            if regions.is_empty() {
                continue;
            }
            let mut track = TrackWriter::new(&format!("variant_{}", kind.number()));
            for v in regions {
                track.note(0, v.start, v.end, LABEL_PITCH, 100);
            }
            tracks.push(track.finish(span, false));
        }
    }

    let mut out = b"MThd".to_vec();
    out.extend(6u32.to_be_bytes());
    out.extend(1u16.to_be_bytes());
    out.extend((tracks.len() as u16).to_be_bytes());
    out.extend(WRITE_DIVISION.to_be_bytes());
    for t in tracks {
        out.extend(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clip::{ChordEvent, MotifLabel, NoteEvent, VariantLabel};

    /// Hand-assembled format-0 file: 96 PPQ, one C4 quarter note.
    fn single_note_file() -> Vec<u8> {
        let mut f = b"MThd".to_vec();
        f.extend([0, 0, 0, 6, 0, 0, 0, 1, 0, 96]);
        let body = [
            0x00, 0x90, 60, 100, // note on
            0x60, 0x80, 60, 0, // 96 pulses later: note off
            0x00, 0xff, 0x2f, 0x00,
        ];
        f.extend(b"MTrk");
        f.extend((body.len() as u32).to_be_bytes());
        f.extend(body);
        f
    }

    #[test]
    fn single_note_in_ticks() {
        let clip = parse_midi(&single_note_file()).unwrap();
        assert_eq!(clip.melody(), &[NoteEvent { start: 0, duration: 4, pitch: 60, velocity: 100 }]);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let mut f = single_note_file();
        f.truncate(f.len() - 5);
        match parse_midi(&f).unwrap_err() {
            MidiError::Malformed { offset, .. } => assert!(offset <= f.len()),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_midi(b"MTh").unwrap_err(), MidiError::Malformed { offset: 0, .. }));
    }

    #[test]
    fn motif_label_track() {
        let clip = Clip::new(
            vec![NoteEvent::new(0, 4, 60), NoteEvent::new(4, 4, 62)],
            vec![],
            vec![MotifLabel::new(0, 16)],
            vec![],
        )
        .unwrap();
        let back = parse_midi(&write_midi(&clip)).unwrap();
        assert_eq!(back.motif_labels(), &[MotifLabel { start: 0, end: 16, note_count: 2 }]);
    }

    #[test]
    fn empty_clip_is_header_only() {
        let bytes = write_midi(&Clip::empty());
        assert_eq!(bytes.len(), 14);
        assert_eq!(parse_midi(&bytes).unwrap(), Clip::empty());
    }

    #[test]
    fn three_variant_regions_round_trip() {
        let melody: Vec<_> = (0..16).map(|i| NoteEvent::new(i * 4, 4, 60 + (i % 5) as u8)).collect();
        let clip = Clip::new(
            melody,
            vec![ChordEvent { start: 0, duration: 16, root: 9, quality: ChordQuality::Minor7 }],
            vec![MotifLabel::new(0, 16)],
            vec![
                VariantLabel::new(VariantType::Repetition, 16, 32),
                VariantLabel::new(VariantType::Inversion, 32, 48),
                VariantLabel::new(VariantType::Repetition, 48, 64),
            ],
        )
        .unwrap();
        let bytes = write_midi(&clip);
        // melody, chord, motif, variant_1, variant_5
        assert_eq!(u16::from_be_bytes([bytes[10], bytes[11]]), 5);
        assert_eq!(parse_midi(&bytes).unwrap(), clip);
    }

    #[test]
    fn rejects_three_four() {
        let mut f = b"MThd".to_vec();
        f.extend([0, 0, 0, 6, 0, 0, 0, 1, 0, 96]);
        let body = [0x00, 0xff, 0x58, 0x04, 3, 2, 24, 8, 0x00, 0xff, 0x2f, 0x00];
        f.extend(b"MTrk");
        f.extend((body.len() as u32).to_be_bytes());
        f.extend(body);
        assert_eq!(parse_midi(&f).unwrap_err(), MidiError::TimeSignature { num: 3, den: 4 });
    }

    #[test]
    fn polyphonic_melody_is_rejected() {
        let mut f = b"MThd".to_vec();
        f.extend([0, 0, 0, 6, 0, 0, 0, 1, 0, 96]);
        let body = [
            0x00, 0x90, 60, 100, 0x00, 0x90, 64, 100, 0x60, 0x80, 60, 0, 0x00, 0x80, 64, 0, 0x00, 0xff, 0x2f, 0x00,
        ];
        f.extend(b"MTrk");
        f.extend((body.len() as u32).to_be_bytes());
        f.extend(body);
        assert!(matches!(parse_midi(&f).unwrap_err(), MidiError::Invalid(ClipError::Polyphonic(_))));
    }

    #[test]
    fn chord_identification_prefers_bass_root() {
        assert_eq!(identify_chord(&[48, 52, 55]), Some((0, ChordQuality::Major)));
        assert_eq!(identify_chord(&[52, 55, 60]), Some((0, ChordQuality::Major)));
        assert_eq!(identify_chord(&[48, 49]), None);
    }
}
