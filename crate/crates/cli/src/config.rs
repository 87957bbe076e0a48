//! `key = value` config files merged into the command line.
//!
//! Keys are long flag names without the leading dashes. The file's values
//! are inserted right after the subcommand, except for keys that are also
//! given on the command line, which win.

use std::path::Path;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", no + 1))?;
        let key = k.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", no + 1));
        }
        out.push((key.to_string(), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Turns pairs into flags. `true` and `false` toggle switches.
fn as_flags(pairs: &[(String, String)]) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        match v.as_str() {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.clone());
            }
        }
    }
    out
}

/// Extracts `--config <file>` from `args` and splices the file's flags in
/// after the subcommand name.
pub fn merge(mut args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a file".into());
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("reading {path}: {e}"))?;
    let given = |k: &str| {
        let flag = format!("--{k}");
        args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let pairs: Vec<_> = parse(&text)?.into_iter().filter(|(k, _)| !given(k)).collect();
    let flags = as_flags(&pairs);
    let at = args
        .iter()
        .position(|a| subcommands.contains(&a.as_str()))
        .map_or(args.len(), |p| p + 1);
    args.splice(at..at, flags);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_quotes() {
        let p = parse("# header\nm1 = 50\n\ntrials=\"10\" # inline\n--rho = 0.02\n").unwrap();
        assert_eq!(
            p,
            vec![
                ("m1".to_string(), "50".to_string()),
                ("trials".to_string(), "10".to_string()),
                ("rho".to_string(), "0.02".to_string()),
            ]
        );
        assert!(parse("no equals sign").is_err());
    }

    #[test]
    fn file_flags_precede_command_line_flags() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.cfg");
        std::fs::write(&f, "trials = 3\nclean = true\nverbose = false\n").unwrap();
        let args: Vec<String> = ["prog", "--seed", "1", "phase", "--config", f.to_str().unwrap(), "--trials", "5"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let merged = merge(args, &["phase"]).unwrap();
        assert_eq!(
            merged,
            vec!["prog", "--seed", "1", "phase", "--clean", "--trials", "5"]
        );
    }
}
