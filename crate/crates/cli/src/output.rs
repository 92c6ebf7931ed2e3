use std::io::IsTerminal;

/// Diagnostic writer for stderr. `MLFSM_COLOR` is `auto` (default),
/// `always` or `never`.
pub struct Output {
    color: bool,
}

#[derive(Clone, Copy)]
pub enum Tone {
    Error,
    Warning,
    Info,
    Ok,
}

impl Output {
    pub fn from_env() -> Self {
        let color = match std::env::var("MLFSM_COLOR").as_deref() {
            Ok("always") => true,
            Ok("never") => false,
            _ => std::env::var_os("NO_COLOR").is_none() && std::io::stderr().is_terminal(),
        };
        Output { color }
    }

    fn paint(&self, tone: Tone, text: &str) -> String {
        if !self.color {
            return text.to_string();
        }
        let code = match tone {
            Tone::Error => "1;31",
            Tone::Warning => "1;33",
            Tone::Info => "1;36",
            Tone::Ok => "1;32",
        };
        format!("\x1b[{code}m{text}\x1b[0m")
    }

    /// Writes `line` to stderr, colouring a leading `error`, `warning`,
    /// `warn`, `fail` or `info` word.
    pub fn diag(&self, line: &str) {
        let split = line
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(line.len());
        let (head, rest) = line.split_at(split);
        let tone = match head {
            "error" | "fail" => Tone::Error,
            "warning" | "warn" => Tone::Warning,
            "info" => Tone::Info,
            _ => {
                eprintln!("{line}");
                return;
            }
        };
        eprintln!("{}{rest}", self.paint(tone, head));
    }

    pub fn error(&self, msg: &str) {
        eprintln!("{}: {msg}", self.paint(Tone::Error, "error"));
    }

    pub fn note(&self, tone: Tone, label: &str, msg: &str) {
        eprintln!("{}: {msg}", self.paint(tone, label));
    }
}
