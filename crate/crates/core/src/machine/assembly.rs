//! Plain-text assembly format for [`MiniRamProgram`].
//!
//! One instruction per line, `#` starts a comment, labels are `name:` on
//! their own line or before an instruction. Registers are written `rN`,
//! immediates are decimal, branch targets are labels or absolute instruction
//! indices.
//!
//! ```text
//! # count down from r0 to 1, emitting each value
//!       li  r1, 1
//! loop: out r0, r0
//!       sub r0, r0, r1
//!       ble r1, r0, loop
//!       halt
//! ```
//!
//! Mnemonics: `li rd, imm` / `add rd, ra, rb` / `sub rd, ra, rb` /
//! `mul rd, ra, rb` / `ble ra, rb, target` / `ldi rd, ra` (`rd <- R[R[ra]]`)
//! / `sti ra, rb` (`R[R[ra]] <- R[rb]`) / `out ri, rj` / `halt`.

use std::collections::HashMap;

use super::miniram::{Instr, LoadError, MiniRamProgram};

/// Parse assembly text into a validated program.
pub fn parse_program(text: &str) -> Result<MiniRamProgram, LoadError> {
    // First pass: strip comments, peel labels, collect instruction slots.
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut slots: Vec<(usize, String)> = Vec::new(); // (line number, body)
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut body = match raw.find('#') {
            Some(at) => &raw[..at],
            None => raw,
        }
        .trim();
        while let Some(colon) = body.find(':') {
            let (label, rest) = body.split_at(colon);
            let label = label.trim();
            if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(LoadError::Parse {
                    line,
                    message: format!("bad label {label:?}"),
                });
            }
            if labels.insert(label.to_string(), slots.len() as u32).is_some() {
                return Err(LoadError::Parse {
                    line,
                    message: format!("duplicate label {label:?}"),
                });
            }
            body = rest[1..].trim();
        }
        if !body.is_empty() {
            slots.push((line, body.to_string()));
        }
    }

    let mut instrs = Vec::with_capacity(slots.len());
    for (line, body) in &slots {
        instrs.push(parse_instr(*line, body, &labels)?);
    }
    MiniRamProgram::new(instrs)
}

fn parse_instr(
    line: usize,
    body: &str,
    labels: &HashMap<String, u32>,
) -> Result<Instr, LoadError> {
    let err = |message: String| LoadError::Parse { line, message };
    let (mnemonic, rest) = match body.split_once(char::is_whitespace) {
        Some((m, r)) => (m, r.trim()),
        None => (body, ""),
    };
    let args: Vec<&str> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(str::trim).collect()
    };
    let want = |n: usize| -> Result<(), LoadError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(format!(
                "{mnemonic} takes {n} operand(s), found {}",
                args.len()
            )))
        }
    };
    let reg = |s: &str| -> Result<u32, LoadError> {
        s.strip_prefix('r')
            .and_then(|n| n.parse::<u32>().ok())
            .ok_or_else(|| err(format!("expected register, found {s:?}")))
    };
    let imm = |s: &str| -> Result<u64, LoadError> {
        s.parse::<u64>()
            .map_err(|_| err(format!("expected integer, found {s:?}")))
    };
    let target = |s: &str| -> Result<u32, LoadError> {
        if let Some(&at) = labels.get(s) {
            Ok(at)
        } else {
            s.parse::<u32>()
                .map_err(|_| err(format!("unknown branch target {s:?}")))
        }
    };

    match mnemonic {
        "li" => {
            want(2)?;
            Ok(Instr::LoadImm {
                dst: reg(args[0])?,
                value: imm(args[1])?,
            })
        }
        "add" | "sub" | "mul" => {
            want(3)?;
            let dst = reg(args[0])?;
            let a = reg(args[1])?;
            let b = reg(args[2])?;
            Ok(match mnemonic {
                "add" => Instr::Add { dst, a, b },
                "sub" => Instr::Sub { dst, a, b },
                _ => Instr::Mul { dst, a, b },
            })
        }
        "ble" => {
            want(3)?;
            Ok(Instr::BranchLe {
                a: reg(args[0])?,
                b: reg(args[1])?,
                target: target(args[2])?,
            })
        }
        "ldi" => {
            want(2)?;
            Ok(Instr::LoadInd {
                dst: reg(args[0])?,
                addr: reg(args[1])?,
            })
        }
        "sti" => {
            want(2)?;
            Ok(Instr::StoreInd {
                addr: reg(args[0])?,
                src: reg(args[1])?,
            })
        }
        "out" => {
            want(2)?;
            Ok(Instr::Output {
                from: reg(args[0])?,
                to: reg(args[1])?,
            })
        }
        "halt" => {
            want(0)?;
            Ok(Instr::Halt)
        }
        other => Err(err(format!("unknown mnemonic {other:?}"))),
    }
}
