//! Layout normalizer for generated Solidity.
//!
//! Re-indents by brace depth (4 spaces per level), strips trailing
//! whitespace, collapses blank-line runs, keeps one blank line after each
//! closed top-level or member block, and ends the text with one newline.
//! Running it twice gives the same result as running it once.

/// Brace balance of one line, ignoring braces inside strings and comments.
/// `in_block_comment` carries `/* ... */` state across lines.
fn brace_delta(line: &str, in_block_comment: &mut bool) -> i64 {
    let bytes = line.as_bytes();
    let mut delta = 0;
    let mut i = 0;
    let mut in_string: Option<u8> = None;
    while i < bytes.len() {
        let c = bytes[i];
        if *in_block_comment {
            if c == b'*' && bytes.get(i + 1) == Some(&b'/') {
                *in_block_comment = false;
                i += 1;
            }
        } else if let Some(q) = in_string {
            if c == b'\\' {
                i += 1;
            } else if c == q {
                in_string = None;
            }
        } else {
            match c {
                b'"' | b'\'' => in_string = Some(c),
                b'/' if bytes.get(i + 1) == Some(&b'/') => break,
                b'/' if bytes.get(i + 1) == Some(&b'*') => {
                    *in_block_comment = true;
                    i += 1;
                }
                b'{' => delta += 1,
                b'}' => delta -= 1,
                _ => {}
            }
        }
        i += 1;
    }
    delta
}

pub fn format_source(source: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut depth: i64 = 0;
    let mut in_comment = false;
    let mut pending_blank = false;
    let mut force_blank = false;

    for raw in source.lines() {
        let line = raw.trim();
        if line.is_empty() {
            pending_blank = true;
            continue;
        }
        let was_in_comment = in_comment;
        let closes_first = !was_in_comment && line.starts_with('}');
        let prev_opens = lines.last().is_some_and(|l| l.ends_with('{'));

        if (pending_blank || force_blank) && !lines.is_empty() && !prev_opens && !closes_first {
            lines.push(String::new());
        }
        pending_blank = false;
        force_blank = false;

        let indent = if closes_first { depth - 1 } else { depth }.max(0) as usize;
        lines.push(format!("{}{}", "    ".repeat(indent), line));

        depth = (depth + brace_delta(line, &mut in_comment)).max(0);
        if closes_first && depth <= 1 && line.trim_end_matches(';') == "}" {
            force_blank = true;
        }
    }

    let mut out = lines.join("\n");
    out.push('\n');
    out
}
