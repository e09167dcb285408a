//! Line-oriented pulse-sequence language.
//!
//! ```text
//! param t = 400          # gate length (µs)
//! param p0 = 80          # RF power (mW)
//! laser
//! mw flip=pi/2 phase=x freq=nu_e rabi=12
//! rf freq=6 power=p0 dur=t/4
//! dd flip=pi phase=x
//! delay dur=t/2
//! dd flip=pi phase=y
//! rf freq=6 power=p0 dur=t/4
//! mw flip=pi/2 phase=x freq=nu_e rabi=12
//! laser
//! measure
//! ```
//!
//! Statements are separated by newlines or `;`. Events run back-to-back in
//! source order unless an explicit `at=<expr>` start time is given. Units are
//! fixed: MHz, µs, mW, rad.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use super::expr::{describe, lex_line, ExprParser, Tok, Token};
use super::DslError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Laser,
    Mw,
    Rf,
    Dd,
    Delay,
    Measure,
}

impl EventKind {
    fn keyword(self) -> &'static str {
        match self {
            EventKind::Laser => "laser",
            EventKind::Mw => "mw",
            EventKind::Rf => "rf",
            EventKind::Dd => "dd",
            EventKind::Delay => "delay",
            EventKind::Measure => "measure",
        }
    }

    /// Channel used for overlap checks; DD pulses share the MW channel.
    pub fn channel(self) -> Channel {
        match self {
            EventKind::Laser | EventKind::Measure => Channel::Optical,
            EventKind::Mw | EventKind::Dd => Channel::Microwave,
            EventKind::Rf => Channel::Rf,
            EventKind::Delay => Channel::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Optical,
    Microwave,
    Rf,
    None,
}

/// One timed event with every expression resolved to a number.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEvent {
    pub kind: EventKind,
    /// Start time (µs).
    pub start: f64,
    /// Duration (µs). Instantaneous events (laser, measure, ideal pulses) use 0.
    pub duration: f64,
    /// Carrier (MHz) for MW and RF.
    pub frequency: Option<f64>,
    /// Rabi frequency (MHz) for finite MW/DD pulses.
    pub rabi: Option<f64>,
    /// RF power (mW).
    pub power: Option<f64>,
    /// Phase (rad).
    pub phase: Option<f64>,
    /// Flip angle (rad) for MW/DD.
    pub flip: Option<f64>,
    pub selective: bool,
}

impl PulseEvent {
    fn new(kind: EventKind) -> Self {
        Self {
            kind,
            start: 0.0,
            duration: 0.0,
            frequency: None,
            rabi: None,
            power: None,
            phase: None,
            flip: None,
            selective: false,
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Parsed sequence: resolved parameters (declaration order) and events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub params: Vec<(String, f64)>,
    pub events: Vec<PulseEvent>,
}

impl PulseSequence {
    /// End of the last event (µs).
    pub fn duration(&self) -> f64 {
        self.events.iter().map(PulseEvent::end).fold(0.0, f64::max)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Canonical source text; parsing it yields an identical sequence.
    pub fn to_source(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in &self.params {
            writeln!(f, "param {name} = {}", num(*v))?;
        }
        let mut cursor = 0.0;
        for ev in &self.events {
            write!(f, "{}", ev.kind.keyword())?;
            if let Some(x) = ev.flip {
                write!(f, " flip={}", num(x))?;
            }
            if let Some(x) = ev.phase {
                write!(f, " phase={}", num(x))?;
            }
            if let Some(x) = ev.frequency {
                write!(f, " freq={}", num(x))?;
            }
            if let Some(x) = ev.rabi {
                write!(f, " rabi={}", num(x))?;
            }
            if let Some(x) = ev.power {
                write!(f, " power={}", num(x))?;
            }
            let has_dur = matches!(ev.kind, EventKind::Rf | EventKind::Delay)
                || (ev.kind == EventKind::Laser && ev.duration != 0.0)
                || ev.rabi.is_some();
            if has_dur {
                write!(f, " dur={}", num(ev.duration))?;
            }
            if ev.start != cursor {
                write!(f, " at={}", num(ev.start))?;
            }
            if ev.selective {
                write!(f, " selective")?;
            }
            writeln!(f)?;
            cursor = ev.end();
        }
        Ok(())
    }
}

/// Shortest round-trip decimal; negative values are parenthesized.
fn num(x: f64) -> String {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        format!("(-{})", -x)
    } else {
        format!("{x}")
    }
}

/// Sequence parser with externally supplied symbols and parameter overrides.
#[derive(Debug, Clone, Default)]
pub struct SequenceParser {
    externals: BTreeMap<String, f64>,
    overrides: BTreeMap<String, f64>,
}

impl SequenceParser {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes `name` available to expressions without a `param` declaration.
    pub fn define(mut self, name: &str, value: f64) -> Self {
        self.externals.insert(name.to_string(), value);
        self
    }

    /// Replaces the value of `param name = …` (or defines it when absent).
    pub fn set(mut self, name: &str, value: f64) -> Self {
        self.overrides.insert(name.to_string(), value);
        self
    }

    pub fn parse(&self, text: &str) -> Result<PulseSequence, DslError> {
        let mut symbols = self.externals.clone();
        for (k, v) in &self.overrides {
            symbols.insert(k.clone(), *v);
        }
        let mut seq = PulseSequence::default();
        let mut cursor = 0.0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let toks = lex_line(raw, line)?;
            let eol = (line, raw.chars().count() + 1);
            for stmt in toks.split(|t| t.tok == Tok::Semi) {
                if stmt.is_empty() {
                    continue;
                }
                let stmt_eol = eol;
                if let Some((name, value)) = self.parse_param(stmt, &symbols, stmt_eol)? {
                    match seq.params.iter_mut().find(|(n, _)| n == &name) {
                        Some(slot) => slot.1 = value,
                        None => seq.params.push((name.clone(), value)),
                    }
                    symbols.insert(name, value);
                    continue;
                }
                let mut ev = parse_event(stmt, &symbols, stmt_eol)?;
                if ev.start.is_nan() {
                    ev.start = cursor;
                }
                cursor = ev.end();
                seq.events.push(ev);
            }
        }
        Ok(seq)
    }

    fn parse_param(
        &self,
        stmt: &[Token],
        symbols: &BTreeMap<String, f64>,
        eol: (usize, usize),
    ) -> Result<Option<(String, f64)>, DslError> {
        if !matches!(&stmt[0].tok, Tok::Ident(k) if k == "param") {
            return Ok(None);
        }
        let name = match stmt.get(1) {
            Some(Token { tok: Tok::Ident(n), .. }) if n != "pi" => n.clone(),
            Some(t) => return Err(syntax(t, "expected parameter name")),
            None => return Err(DslError::Syntax { line: eol.0, col: eol.1, msg: "expected parameter name".into() }),
        };
        match stmt.get(2) {
            Some(Token { tok: Tok::Eq, .. }) => {}
            Some(t) => return Err(syntax(t, "expected `=`")),
            None => return Err(DslError::Syntax { line: eol.0, col: eol.1, msg: "expected `=`".into() }),
        }
        let rest = &stmt[3..];
        let mut p = ExprParser::new(rest, symbols, eol);
        let v = p.expr()?;
        if let Some(t) = rest.get(p.consumed()) {
            return Err(syntax(t, &format!("unexpected {} after expression", describe(&t.tok))));
        }
        if let Some(&ov) = self.overrides.get(&name) {
            return Ok(Some((name, ov)));
        }
        Ok(Some((name, v)))
    }
}

/// Parses with no external symbols.
pub fn parse(text: &str) -> Result<PulseSequence, DslError> {
    SequenceParser::new().parse(text)
}

fn syntax(t: &Token, msg: &str) -> DslError {
    DslError::Syntax { line: t.line, col: t.col, msg: msg.to_string() }
}

fn allowed_keys(kind: EventKind) -> &'static [&'static str] {
    match kind {
        EventKind::Laser => &["dur", "at"],
        EventKind::Measure => &["at"],
        EventKind::Mw => &["flip", "phase", "freq", "rabi", "dur", "at"],
        EventKind::Dd => &["flip", "phase", "rabi", "dur", "at"],
        EventKind::Rf => &["freq", "power", "dur", "phase", "at"],
        EventKind::Delay => &["dur", "at"],
    }
}

fn parse_event(
    stmt: &[Token],
    symbols: &BTreeMap<String, f64>,
    eol: (usize, usize),
) -> Result<PulseEvent, DslError> {
    let head = &stmt[0];
    let kind = match &head.tok {
        Tok::Ident(k) => match k.as_str() {
            "laser" => EventKind::Laser,
            "mw" => EventKind::Mw,
            "rf" => EventKind::Rf,
            "dd" => EventKind::Dd,
            "delay" => EventKind::Delay,
            "measure" => EventKind::Measure,
            other => return Err(syntax(head, &format!("unknown statement `{other}`"))),
        },
        t => return Err(syntax(head, &format!("expected a statement, found {}", describe(t)))),
    };
    let mut ev = PulseEvent::new(kind);
    let mut args: BTreeMap<&'static str, (f64, usize, usize)> = BTreeMap::new();
    let mut i = 1;
    while i < stmt.len() {
        let key_tok = &stmt[i];
        let key = match &key_tok.tok {
            Tok::Ident(k) => k.clone(),
            t => return Err(syntax(key_tok, &format!("expected `key=value`, found {}", describe(t)))),
        };
        if key == "selective" && kind == EventKind::Mw {
            ev.selective = true;
            i += 1;
            continue;
        }
        let canonical = allowed_keys(kind).iter().find(|&&k| k == key).copied().ok_or_else(|| {
            syntax(key_tok, &format!("unknown key `{key}` for `{}`", kind.keyword()))
        })?;
        if args.contains_key(canonical) {
            return Err(syntax(key_tok, &format!("duplicate key `{key}`")));
        }
        match stmt.get(i + 1) {
            Some(Token { tok: Tok::Eq, .. }) => {}
            Some(t) => return Err(syntax(t, &format!("expected `=` after `{key}`"))),
            None => {
                return Err(DslError::Syntax {
                    line: eol.0,
                    col: eol.1,
                    msg: format!("expected `=` after `{key}`"),
                })
            }
        }
        i += 2;
        let value = if canonical == "phase" { named_phase(&stmt[i..]) } else { None };
        let (v, used) = match value {
            Some(x) => x,
            None => {
                let mut p = ExprParser::new(&stmt[i..], symbols, eol);
                let v = p.expr()?;
                (v, p.consumed())
            }
        };
        if !v.is_finite() {
            return Err(syntax(key_tok, &format!("`{key}` is not finite")));
        }
        args.insert(canonical, (v, key_tok.line, key_tok.col));
        i += used;
    }
    let line = head.line;
    let get = |k: &str| args.get(k).map(|a| a.0);
    let invalid = |msg: String| DslError::Validation { line, msg };

    ev.phase = get("phase");
    ev.frequency = get("freq");
    ev.rabi = get("rabi");
    ev.power = get("power");
    ev.flip = get("flip");
    ev.start = get("at").unwrap_or(f64::NAN);
    if let Some(at) = get("at") {
        if at < 0.0 {
            return Err(invalid(format!("start time must be non-negative, got {at}")));
        }
    }
    let dur = get("dur");
    if let Some(d) = dur {
        if d < 0.0 {
            return Err(invalid(format!("negative duration {d} µs")));
        }
    }
    if let Some(r) = ev.rabi {
        if !(r > 0.0) {
            return Err(invalid(format!("rabi frequency must be positive, got {r}")));
        }
    }
    match kind {
        EventKind::Laser => ev.duration = dur.unwrap_or(0.0),
        EventKind::Measure => {}
        EventKind::Delay => {
            ev.duration = dur.ok_or_else(|| invalid("`delay` requires dur=".into()))?;
        }
        EventKind::Rf => {
            for k in ["freq", "power", "dur"] {
                if !args.contains_key(k) {
                    return Err(invalid(format!("`rf` requires {k}=")));
                }
            }
            ev.duration = dur.unwrap_or(0.0);
            if ev.power.unwrap_or(0.0) < 0.0 {
                return Err(invalid("RF power must be non-negative".into()));
            }
            if !(ev.frequency.unwrap_or(0.0) > 0.0) {
                return Err(invalid("RF frequency must be positive".into()));
            }
        }
        EventKind::Mw | EventKind::Dd => {
            if ev.phase.is_none() {
                return Err(invalid(format!("`{}` requires phase=", kind.keyword())));
            }
            match (ev.flip, ev.rabi, dur) {
                (Some(flip), Some(rabi), Some(d)) => {
                    if (flip.abs() - 2.0 * PI * rabi * d).abs() > 1e-9 * flip.abs().max(1e-300) {
                        return Err(invalid("flip=, rabi= and dur= are inconsistent".into()));
                    }
                    ev.duration = d;
                }
                (Some(flip), Some(rabi), None) => ev.duration = flip.abs() / (2.0 * PI * rabi),
                (None, Some(rabi), Some(d)) => {
                    ev.duration = d;
                    ev.flip = Some(2.0 * PI * rabi * d);
                }
                (Some(_), None, None) => ev.duration = 0.0,
                (Some(_), None, Some(_)) => {
                    return Err(invalid("dur= needs rabi=; omit dur for an ideal pulse".into()))
                }
                _ => return Err(invalid(format!("`{}` requires flip=", kind.keyword()))),
            }
            if kind == EventKind::Dd && ev.flip.is_none() {
                ev.flip = Some(PI);
            }
        }
    }
    Ok(ev)
}

/// `x`, `y`, `-x`, `-y` phase shorthands.
fn named_phase(toks: &[Token]) -> Option<(f64, usize)> {
    let axis = |t: &Token| match &t.tok {
        Tok::Ident(s) if s == "x" => Some(0.0),
        Tok::Ident(s) if s == "y" => Some(FRAC_PI_2),
        _ => None,
    };
    let continues = |t: Option<&Token>| {
        matches!(t.map(|t| &t.tok), Some(Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash))
    };
    match toks {
        [t, rest @ ..] if axis(t).is_some() && !continues(rest.first()) => Some((axis(t)?, 1)),
        [Token { tok: Tok::Minus, .. }, t, rest @ ..] if axis(t).is_some() && !continues(rest.first()) => {
            Some((axis(t)? + PI, 2))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_statements() {
        let seq = SequenceParser::new()
            .define("nu_e", 2438.739)
            .parse("laser; mw flip=pi/2 phase=x freq=nu_e rabi=12; laser")
            .unwrap();
        assert_eq!(seq.events.len(), 3);
        let mw = &seq.events[1];
        assert_eq!(mw.kind, EventKind::Mw);
        assert!((mw.duration - 1.0 / 48.0).abs() < 1e-15);
        assert!((mw.duration - 0.020833).abs() < 1e-6);
        assert_eq!(mw.frequency, Some(2438.739));
        assert_eq!(seq.events[2].start, mw.end());
    }

    #[test]
    fn substitutes_parameters() {
        let seq = parse("param t = 400\nparam p0 = 80\nrf freq=6 power=p0 dur=t/4").unwrap();
        let rf = &seq.events[0];
        assert_eq!(rf.duration, 100.0);
        assert_eq!(rf.power, Some(80.0));
        assert_eq!(seq.param("t"), Some(400.0));
    }

    #[test]
    fn overrides_replace_declarations() {
        let seq = SequenceParser::new().set("t", 40.0).parse("param t = 400\ndelay dur=t").unwrap();
        assert_eq!(seq.events[0].duration, 40.0);
        assert_eq!(seq.param("t"), Some(40.0));
    }

    #[test]
    fn misspelled_key_is_a_syntax_error() {
        match parse("mw flip=pi/2 fase=x") {
            Err(DslError::Syntax { line, col, msg }) => {
                assert_eq!(line, 1);
                assert_eq!(col, 14);
                assert!(msg.contains("fase"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undefined_and_negative() {
        assert!(matches!(
            parse("delay dur=tau"),
            Err(DslError::UndefinedParameter { ref name, .. }) if name == "tau"
        ));
        assert!(matches!(parse("delay dur=-5"), Err(DslError::Validation { .. })));
        assert!(matches!(parse("rf freq=6 dur=1"), Err(DslError::Validation { .. })));
        assert!(matches!(parse("wait dur=1"), Err(DslError::Syntax { .. })));
        assert!(matches!(parse("mw phase=x"), Err(DslError::Validation { .. })));
    }

    #[test]
    fn phase_shorthands() {
        let seq = parse("dd flip=pi phase=x; dd flip=pi phase=y; dd flip=pi phase=-x; dd flip=pi phase=-y; dd flip=pi phase=pi/4").unwrap();
        let ph: Vec<f64> = seq.events.iter().map(|e| e.phase.unwrap()).collect();
        assert_eq!(ph, vec![0.0, FRAC_PI_2, PI, PI + FRAC_PI_2, PI / 4.0]);
        assert!(seq.events.iter().all(|e| e.duration == 0.0));
    }

    #[test]
    fn explicit_start_and_flags() {
        let seq = parse("delay dur=1\nmw flip=pi phase=y freq=1 rabi=0.3 at=5 selective").unwrap();
        assert_eq!(seq.events[1].start, 5.0);
        assert!(seq.events[1].selective);
        let text = seq.to_source();
        assert!(text.contains("at=5"), "{text}");
        assert_eq!(parse(&text).unwrap(), seq);
    }

    #[test]
    fn rabi_and_duration_define_flip() {
        let seq = parse("mw phase=x freq=2438 rabi=12 dur=0.5/12").unwrap();
        let ev = &seq.events[0];
        assert!((ev.flip.unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn print_roundtrip_fig3() {
        let text = "param t = 400\nparam p0 = 80\nlaser\nmw flip=pi/2 phase=x freq=2438.739 rabi=12\n\
                    rf freq=6 power=p0 dur=t/4\ndd flip=pi phase=x\ndelay dur=t/2\ndd flip=pi phase=y\n\
                    rf freq=6 power=p0 dur=t/4 phase=-0.3\nmw flip=pi/2 phase=x freq=2438.739 rabi=12\nlaser\nmeasure\n";
        let seq = parse(text).unwrap();
        let again = parse(&seq.to_source()).unwrap();
        assert_eq!(seq, again);
        assert!((seq.duration() - (400.0 + 2.0 / 48.0)).abs() < 1e-12);
    }
}
