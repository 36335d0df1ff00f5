//! Newick reading and writing.
//!
//! Accepted grammar:
//!
//! ```text
//! tree     := subtree (':' length)? ';'
//! subtree  := '(' subtree (',' subtree)* ')' label? (':' length)?
//!           | label (':' length)?
//! label    := [A-Za-z0-9_.-]+ | '\'' ([^'] | "''")+ '\''
//! length   := [0-9eE.+-]+          (must parse as a finite f64)
//! ```
//!
//! Whitespace is allowed between tokens. Leaves must be labeled, every
//! non-root edge must carry a strictly positive length, and labels are unique
//! (generated `_in<N>` names included).

use crate::tree::{NodeSpec, PhyloTree, TreeError};

pub fn parse_newick(text: &str) -> Result<PhyloTree, TreeError> {
    let mut p = Parser { src: text.as_bytes(), text, pos: 0 };
    let (nodes, root_length) = p.parse()?;
    PhyloTree::from_nodes(nodes, root_length)
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T, TreeError> {
        Err(TreeError::Syntax { position, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse(&mut self) -> Result<(Vec<NodeSpec>, Option<f64>), TreeError> {
        let mut nodes: Vec<NodeSpec> = Vec::new();
        let mut open: Vec<(usize, usize)> = Vec::new(); // (node index, position of '(')
        let mut expect_subtree = true;
        loop {
            let at = self.pos_after_ws();
            if expect_subtree {
                match self.peek() {
                    Some(b'(') => {
                        self.pos += 1;
                        nodes.push(NodeSpec { label: None, parent: open.last().map(|o| o.0), branch_length: None });
                        open.push((nodes.len() - 1, at));
                    }
                    Some(c) if is_label_start(c) => {
                        let label = self.label()?;
                        let branch_length = self.length()?;
                        nodes.push(NodeSpec { label: Some(label), parent: open.last().map(|o| o.0), branch_length });
                        expect_subtree = false;
                    }
                    Some(c) => return self.err(at, format!("expected '(' or a leaf label, found '{}'", c as char)),
                    None => return self.err(at, "unexpected end of input, expected '(' or a leaf label"),
                }
                continue;
            }
            match self.peek() {
                Some(b',') if open.is_empty() => return self.err(at, "',' outside of parentheses"),
                Some(b',') => {
                    self.pos += 1;
                    expect_subtree = true;
                }
                Some(b')') => {
                    let Some((v, _)) = open.pop() else {
                        return self.err(at, "unmatched ')'");
                    };
                    self.pos += 1;
                    if matches!(self.peek(), Some(c) if is_label_start(c)) {
                        nodes[v].label = Some(self.label()?);
                    }
                    nodes[v].branch_length = self.length()?;
                }
                Some(b';') => {
                    if let Some(&(_, p)) = open.last() {
                        return self.err(p, "unclosed '('");
                    }
                    self.pos += 1;
                    self.skip_ws();
                    if self.pos != self.src.len() {
                        return self.err(self.pos, "unexpected characters after ';'");
                    }
                    let root_length = nodes[0].branch_length.take();
                    return Ok((nodes, root_length));
                }
                Some(c) => return self.err(at, format!("expected ',', ')' or ';', found '{}'", c as char)),
                None if !open.is_empty() => return self.err(at, "unexpected end of input, unclosed '('"),
                None => return self.err(at, "unexpected end of input, expected ';'"),
            }
        }
    }

    fn pos_after_ws(&mut self) -> usize {
        self.skip_ws();
        self.pos
    }

    fn label(&mut self) -> Result<String, TreeError> {
        let start = self.pos;
        if self.src[start] == b'\'' {
            let mut out = String::new();
            let mut i = start + 1;
            let mut run = i;
            loop {
                match self.src.get(i) {
                    None => return self.err(start, "unterminated quoted label"),
                    Some(b'\'') if self.src.get(i + 1) == Some(&b'\'') => {
                        out.push_str(&self.text[run..=i]);
                        i += 2;
                        run = i;
                    }
                    Some(b'\'') => {
                        out.push_str(&self.text[run..i]);
                        self.pos = i + 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            if out.is_empty() {
                return self.err(start, "empty quoted label");
            }
            Ok(out)
        } else {
            while self.pos < self.src.len() && is_label_char(self.src[self.pos]) {
                self.pos += 1;
            }
            Ok(self.text[start..self.pos].to_string())
        }
    }

    fn length(&mut self) -> Result<Option<f64>, TreeError> {
        if self.peek() != Some(b':') {
            return Ok(None);
        }
        self.pos += 1;
        let start = self.pos_after_ws();
        while self.pos < self.src.len() && is_length_char(self.src[self.pos]) {
            self.pos += 1;
        }
        let tok = &self.text[start..self.pos];
        if tok.is_empty() {
            return self.err(start, "expected branch length after ':'");
        }
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) => self.err(start, format!("branch length '{tok}' out of range")),
            Err(_) => self.err(start, format!("invalid branch length '{tok}'")),
        }
    }
}

#[inline]
fn is_label_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'-')
}

#[inline]
fn is_label_start(c: u8) -> bool {
    is_label_char(c) || c == b'\''
}

#[inline]
fn is_length_char(c: u8) -> bool {
    c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-')
}

/// Writes `tree` as Newick with every label (generated ones included) and
/// branch lengths in shortest round-trip form.
pub fn serialize_newick(tree: &PhyloTree) -> String {
    let mut out = String::with_capacity(tree.len() * 12);
    // Explicit stack: (node, entering?)
    let mut stack = vec![(tree.root(), true)];
    while let Some((v, entering)) = stack.pop() {
        let children = tree.children(v);
        if entering && !children.is_empty() {
            out.push('(');
            stack.push((v, false));
            stack.extend(children.iter().rev().map(|&c| (c, true)));
            continue;
        }
        if !entering {
            out.push(')');
        }
        write_label(&mut out, tree.label(v));
        if let Some(p) = tree.parent(v) {
            out.push(':');
            out.push_str(&tree.node(v).branch_length.to_string());
            let sibs = tree.children(p);
            if sibs.last() != Some(&v) {
                out.push(',');
            }
        } else if let Some(l) = tree.root_length() {
            out.push(':');
            out.push_str(&l.to_string());
        }
    }
    out.push(';');
    out
}

fn write_label(out: &mut String, label: &str) {
    if !label.is_empty() && label.bytes().all(is_label_char) {
        out.push_str(label);
    } else {
        out.push('\'');
        out.push_str(&label.replace('\'', "''"));
        out.push('\'');
    }
}
