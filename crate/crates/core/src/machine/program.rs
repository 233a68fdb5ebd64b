//! Instruction set and assembler for oracle-machine programs.
//!
//! Assembly grammar, one instruction per line:
//!
//! ```text
//! line      := [label ':'] [instr] [';' comment]
//! instr     := COIN | INPUT | PUSH0 | PUSH1 | POP | DUP | NOT
//!            | JMP label | JZ label | OUT0 | OUT1 | HALT
//!            | QCLEAR | QLIT bits | QPUSH | QINPUT | QPREFIX n
//!            | ORACLE ref ',' string ',' dyadic
//! ref       := SELF | positive registry index
//! string    := ε | "" | - | bits | BUF | IN
//! dyadic    := n/2^k | n/d (d a power of two) | decimal, strictly between 0 and 1
//! ```
//!
//! The machine keeps a bit stack, an input cursor and a query buffer.
//! `JZ` pops the top bit and jumps when it is 0. `QPUSH` pops a bit onto the
//! query buffer, `QINPUT` appends the whole input and `QPREFIX n` appends its
//! first `n` bits. `ORACLE` pushes the oracle's answer. Popping an empty stack,
//! exhausting the input, running past the last instruction or `HALT` all stop
//! the run without output.

use std::collections::HashMap;

use num::{One, Signed, ToPrimitive};

use super::bits::Bits;
use crate::rational::{as_dyadic, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MachineRef {
    Index(usize),
    SelfRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StringExpr {
    Literal(Bits),
    Buffer,
    Input,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instr {
    Coin,
    Input,
    Push(bool),
    Pop,
    Dup,
    Not,
    Jmp(usize),
    Jz(usize),
    Out(bool),
    Halt,
    QClear,
    QLit(Bits),
    QPush,
    QInput,
    QPrefix(usize),
    Oracle { machine: MachineRef, string: StringExpr, threshold: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    instrs: Vec<Instr>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssembleErrorKind {
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("malformed dyadic literal `{0}`")]
    MalformedDyadic(String),
    #[error("threshold {0} must lie strictly between 0 and 1")]
    ThresholdOutOfRange(String),
    #[error("missing operand for {0}")]
    MissingOperand(String),
    #[error("unexpected operand `{0}`")]
    ExtraOperand(String),
    #[error("bad operand `{0}`")]
    BadOperand(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct AssembleError {
    pub line: usize,
    pub column: usize,
    pub kind: AssembleErrorKind,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut col_of_start = 0;
    for (col, (byte_idx, c)) in line.char_indices().enumerate() {
        let sep = c.is_whitespace() || c == ',';
        match (sep, start) {
            (true, Some(s)) => {
                out.push(Token { text: &line[s..byte_idx], column: col_of_start + 1 });
                start = None;
            }
            (false, None) => {
                start = Some(byte_idx);
                col_of_start = col;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: col_of_start + 1 });
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse a dyadic threshold literal; it must lie strictly inside (0, 1).
pub fn parse_dyadic(s: &str) -> Result<Rational, AssembleErrorKind> {
    let bad = || AssembleErrorKind::MalformedDyadic(s.to_string());
    let value = if let Some((n, k)) = s.split_once("/2^") {
        let n: u64 = n.parse().map_err(|_| bad())?;
        let k: u32 = k.parse().map_err(|_| bad())?;
        if k > 62 {
            return Err(bad());
        }
        crate::rational::dyadic(n, k)
    } else {
        parse_rational(s).map_err(|_| bad())?
    };
    if as_dyadic(&value).is_none() {
        return Err(bad());
    }
    if !value.is_positive() || value >= Rational::one() {
        return Err(AssembleErrorKind::ThresholdOutOfRange(s.to_string()));
    }
    Ok(value)
}

enum Pending {
    Done(Instr),
    Jump { conditional: bool, label: String, column: usize },
}

/// Assemble program text. `SELF` stays symbolic until registration.
pub fn assemble(source: &str) -> Result<Program, AssembleError> {
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<(usize, Pending)> = Vec::new();

    for (ln, raw) in source.lines().enumerate() {
        let line_no = ln + 1;
        let code = raw.split(';').next().unwrap_or("");
        let mut toks = tokenize(code);
        let err = |column: usize, kind| AssembleError { line: line_no, column, kind };
        if toks.is_empty() {
            continue;
        }
        if let Some(name) = toks[0].text.strip_suffix(':') {
            if !is_ident(name) {
                return Err(err(toks[0].column, AssembleErrorKind::BadOperand(toks[0].text.into())));
            }
            if labels.insert(name.to_string(), pending.len()).is_some() {
                return Err(err(toks[0].column, AssembleErrorKind::DuplicateLabel(name.into())));
            }
            toks.remove(0);
            if toks.is_empty() {
                continue;
            }
        }
        let op = toks[0].text.to_ascii_uppercase();
        let op_col = toks[0].column;
        let args = &toks[1..];
        let arity = |n: usize| -> Result<(), AssembleError> {
            if args.len() < n {
                Err(err(op_col, AssembleErrorKind::MissingOperand(op.clone())))
            } else if args.len() > n {
                Err(err(args[n].column, AssembleErrorKind::ExtraOperand(args[n].text.into())))
            } else {
                Ok(())
            }
        };
        let simple = |i: Instr| -> Result<Pending, AssembleError> {
            arity(0)?;
            Ok(Pending::Done(i))
        };
        let item =
            match op.as_str() {
                "COIN" => simple(Instr::Coin)?,
                "INPUT" => simple(Instr::Input)?,
                "PUSH0" => simple(Instr::Push(false))?,
                "PUSH1" => simple(Instr::Push(true))?,
                "POP" => simple(Instr::Pop)?,
                "DUP" => simple(Instr::Dup)?,
                "NOT" => simple(Instr::Not)?,
                "OUT0" => simple(Instr::Out(false))?,
                "OUT1" => simple(Instr::Out(true))?,
                "HALT" => simple(Instr::Halt)?,
                "QCLEAR" => simple(Instr::QClear)?,
                "QPUSH" => simple(Instr::QPush)?,
                "QINPUT" => simple(Instr::QInput)?,
                "JMP" | "JZ" => {
                    arity(1)?;
                    if !is_ident(args[0].text) {
                        return Err(err(args[0].column, AssembleErrorKind::BadOperand(args[0].text.into())));
                    }
                    Pending::Jump { conditional: op == "JZ", label: args[0].text.to_string(), column: args[0].column }
                }
                "QLIT" => {
                    arity(1)?;
                    let bits: Bits = args[0]
                        .text
                        .parse()
                        .map_err(|_| err(args[0].column, AssembleErrorKind::BadOperand(args[0].text.into())))?;
                    Pending::Done(Instr::QLit(bits))
                }
                "QPREFIX" => {
                    arity(1)?;
                    let n: usize = args[0]
                        .text
                        .parse()
                        .map_err(|_| err(args[0].column, AssembleErrorKind::BadOperand(args[0].text.into())))?;
                    Pending::Done(Instr::QPrefix(n))
                }
                "ORACLE" => {
                    arity(3)?;
                    let machine = if args[0].text.eq_ignore_ascii_case("SELF") {
                        MachineRef::SelfRef
                    } else {
                        match args[0].text.parse::<usize>() {
                            Ok(i) if i >= 1 => MachineRef::Index(i),
                            _ => return Err(err(args[0].column, AssembleErrorKind::BadOperand(args[0].text.into()))),
                        }
                    };
                    let string =
                        match args[1].text.to_ascii_uppercase().as_str() {
                            "BUF" => StringExpr::Buffer,
                            "IN" => StringExpr::Input,
                            _ => StringExpr::Literal(args[1].text.parse().map_err(|_| {
                                err(args[1].column, AssembleErrorKind::BadOperand(args[1].text.into()))
                            })?),
                        };
                    let threshold = parse_dyadic(args[2].text).map_err(|k| err(args[2].column, k))?;
                    Pending::Done(Instr::Oracle { machine, string, threshold })
                }
                _ => return Err(err(op_col, AssembleErrorKind::UnknownOpcode(toks[0].text.into()))),
            };
        pending.push((line_no, item));
    }

    let instrs = pending
        .into_iter()
        .map(|(line, p)| match p {
            Pending::Done(i) => Ok(i),
            Pending::Jump { conditional, label, column } => match labels.get(&label) {
                Some(&t) if conditional => Ok(Instr::Jz(t)),
                Some(&t) => Ok(Instr::Jmp(t)),
                None => Err(AssembleError { line, column, kind: AssembleErrorKind::UnknownLabel(label) }),
            },
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Program { instrs })
}

fn leb128(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn encode_bits(out: &mut Vec<u8>, b: &Bits) {
    leb128(out, b.len() as u64);
    out.extend(b.packed());
}

impl Program {
    pub fn from_instrs(instrs: Vec<Instr>) -> Self {
        Program { instrs }
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn uses_oracle(&self) -> bool {
        self.instrs.iter().any(|i| matches!(i, Instr::Oracle { .. }))
    }

    /// Replace `SELF` by `index`.
    pub fn resolve_self(&self, index: usize) -> Program {
        let instrs = self
            .instrs
            .iter()
            .map(|i| match i {
                Instr::Oracle { machine: MachineRef::SelfRef, string, threshold } => Instr::Oracle {
                    machine: MachineRef::Index(index),
                    string: string.clone(),
                    threshold: threshold.clone(),
                },
                other => other.clone(),
            })
            .collect();
        Program { instrs }
    }

    /// Canonical byte encoding. Its length is the program's code length.
    ///
    /// One opcode byte per instruction; jump targets, lengths and registry
    /// indices are LEB128; a threshold `n/2^k` is the byte `k` followed by `n`
    /// in LEB128; `SELF` is index 0.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for i in &self.instrs {
            match i {
                Instr::Coin => out.push(0x01),
                Instr::Input => out.push(0x02),
                Instr::Push(false) => out.push(0x03),
                Instr::Push(true) => out.push(0x04),
                Instr::Pop => out.push(0x05),
                Instr::Dup => out.push(0x06),
                Instr::Not => out.push(0x07),
                Instr::Jmp(t) => {
                    out.push(0x08);
                    leb128(&mut out, *t as u64);
                }
                Instr::Jz(t) => {
                    out.push(0x09);
                    leb128(&mut out, *t as u64);
                }
                Instr::Out(false) => out.push(0x0a),
                Instr::Out(true) => out.push(0x0b),
                Instr::Halt => out.push(0x0c),
                Instr::QClear => out.push(0x0d),
                Instr::QLit(b) => {
                    out.push(0x0e);
                    encode_bits(&mut out, b);
                }
                Instr::QPush => out.push(0x0f),
                Instr::QInput => out.push(0x10),
                Instr::QPrefix(n) => {
                    out.push(0x11);
                    leb128(&mut out, *n as u64);
                }
                Instr::Oracle { machine, string, threshold } => {
                    out.push(0x12);
                    leb128(
                        &mut out,
                        match machine {
                            MachineRef::SelfRef => 0,
                            MachineRef::Index(i) => *i as u64,
                        },
                    );
                    match string {
                        StringExpr::Buffer => out.push(0x00),
                        StringExpr::Input => out.push(0x01),
                        StringExpr::Literal(b) => {
                            out.push(0x02);
                            encode_bits(&mut out, b);
                        }
                    }
                    let (n, k) = as_dyadic(threshold).expect("thresholds are dyadic");
                    out.push(k as u8);
                    leb128(&mut out, n.to_u64().unwrap_or(0));
                }
            }
        }
        out
    }

    pub fn code_length(&self) -> usize {
        self.encode().len()
    }

    /// Render back to assembly text (labels become `L<index>`).
    pub fn disassemble(&self) -> String {
        let mut targets: Vec<usize> = self
            .instrs
            .iter()
            .filter_map(|i| match i {
                Instr::Jmp(t) | Instr::Jz(t) => Some(*t),
                _ => None,
            })
            .collect();
        targets.sort_unstable();
        targets.dedup();
        let mut out = String::new();
        for (pc, i) in self.instrs.iter().enumerate() {
            if targets.binary_search(&pc).is_ok() {
                out.push_str(&format!("L{pc}: "));
            }
            let text = match i {
                Instr::Coin => "COIN".to_string(),
                Instr::Input => "INPUT".to_string(),
                Instr::Push(b) => format!("PUSH{}", *b as u8),
                Instr::Pop => "POP".to_string(),
                Instr::Dup => "DUP".to_string(),
                Instr::Not => "NOT".to_string(),
                Instr::Jmp(t) => format!("JMP L{t}"),
                Instr::Jz(t) => format!("JZ L{t}"),
                Instr::Out(b) => format!("OUT{}", *b as u8),
                Instr::Halt => "HALT".to_string(),
                Instr::QClear => "QCLEAR".to_string(),
                Instr::QLit(b) => format!("QLIT {b}"),
                Instr::QPush => "QPUSH".to_string(),
                Instr::QInput => "QINPUT".to_string(),
                Instr::QPrefix(n) => format!("QPREFIX {n}"),
                Instr::Oracle { machine, string, threshold } => {
                    let m = match machine {
                        MachineRef::SelfRef => "SELF".to_string(),
                        MachineRef::Index(i) => i.to_string(),
                    };
                    let s = match string {
                        StringExpr::Buffer => "BUF".to_string(),
                        StringExpr::Input => "IN".to_string(),
                        StringExpr::Literal(b) => b.to_string(),
                    };
                    format!("ORACLE {m}, {s}, {}", crate::rational::show(threshold))
                }
            };
            out.push_str(&text);
            out.push('\n');
        }
        out
    }
}

/// Programs from the worked examples, as assembly text.
pub mod library {
    /// Asks whether it outputs 1 with probability above 1/2 and does the opposite.
    pub const DIAGONALIZER: &str = "ORACLE SELF, ε, 1/2\nJZ one\nOUT0\none: OUT1\n";
    pub const CONST_ONE: &str = "OUT1\n";
    pub const CONST_ZERO: &str = "OUT0\n";
    pub const LOOP: &str = "top: JMP top\n";
    pub const FAIR_COIN: &str = "COIN\nJZ zero\nOUT1\nzero: OUT0\n";
    /// Outputs 1 with probability 3/4.
    pub const COIN_3_4: &str = "COIN\nJZ zero\nOUT1\nzero: COIN\nJZ z2\nOUT1\nz2: OUT0\n";
    /// Outputs 1 with probability 1/4.
    pub const COIN_1_4: &str = "COIN\nJZ zero\nOUT0\nzero: COIN\nJZ z2\nOUT0\nz2: OUT1\n";
    /// Echoes the first input bit, halting silently on empty input.
    pub const ECHO: &str = "INPUT\nJZ zero\nOUT1\nzero: OUT0\n";
}
