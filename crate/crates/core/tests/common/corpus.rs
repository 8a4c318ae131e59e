//! Labeled version pairs under `fixtures/crossref/`.

use intentcov::lang::{compile_source, ProgramModule};

use super::read_fixture;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Normal,
    Symmetric,
    Deleted,
}

pub struct Pair {
    pub name: String,
    pub kind: Kind,
    pub old: ProgramModule,
    pub new: ProgramModule,
}

pub fn load(file: &str) -> Vec<Pair> {
    let text = read_fixture(file);
    let mut out = Vec::new();
    let mut head: Option<String> = None;
    let mut old = String::new();
    let mut new = String::new();
    let mut into_new = false;
    let mut flush = |head: &mut Option<String>, old: &mut String, new: &mut String| {
        let Some(h) = head.take() else { return };
        let (name, rest) = h.split_once(" [").expect("=== name [kind]");
        let (kind, files) = rest.split_once(']').unwrap();
        let kind = match kind {
            "normal" => Kind::Normal,
            "symmetric" => Kind::Symmetric,
            "deleted" => Kind::Deleted,
            k => panic!("unknown kind {k}"),
        };
        let (a, b) = match files.trim().strip_prefix("=> ") {
            Some(f) => {
                let (x, y) = f.split_once(' ').unwrap();
                (read_fixture(x), read_fixture(y))
            }
            None => (std::mem::take(old), std::mem::take(new)),
        };
        let compile = |s: &str| compile_source(s).unwrap_or_else(|e| panic!("{name}: {e}"));
        out.push(Pair { name: name.to_string(), kind, old: compile(&a), new: compile(&b) });
        old.clear();
        new.clear();
    };
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("=== ") {
            flush(&mut head, &mut old, &mut new);
            head = Some(h.to_string());
            into_new = false;
        } else if line == "--- old" {
            into_new = false;
        } else if line == "--- new" {
            into_new = true;
        } else if head.is_some() && !line.starts_with('#') {
            let buf = if into_new { &mut new } else { &mut old };
            buf.push_str(line);
            buf.push('\n');
        }
    }
    flush(&mut head, &mut old, &mut new);
    out
}
