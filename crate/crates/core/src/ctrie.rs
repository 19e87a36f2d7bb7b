//! Candidate prefix trie.
//!
//! A single arena-backed trie over case-folded tokens. The children of the
//! virtual root are the roots of the per-first-token subtrees, so candidates
//! sharing a prefix share a path.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::text::fold;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrieError {
    #[error("candidate key must contain at least one token")]
    EmptyKey,
    #[error("node handle {0} does not belong to this trie")]
    StaleHandle(usize),
}

/// Handle to a trie node. Only valid for the trie that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: BTreeMap<String, NodeId>,
    key: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CandidateTrie {
    nodes: Vec<Node>,
    candidates: usize,
}

impl Default for CandidateTrie {
    fn default() -> Self {
        Self::new()
    }
}

impl CandidateTrie {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::default()],
            candidates: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    /// Number of nodes including the virtual root.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates
    }

    pub fn is_empty(&self) -> bool {
        self.candidates == 0
    }

    /// Inserts a candidate. Tokens are folded on the way in, so callers may
    /// pass raw or already folded tokens. Inserting an existing key is a no-op.
    pub fn insert<S: AsRef<str>>(&mut self, key: &[S]) -> Result<NodeId, TrieError> {
        if key.is_empty() {
            return Err(TrieError::EmptyKey);
        }
        let mut node = NodeId::ROOT;
        for token in key {
            let folded = fold(token.as_ref());
            node = match self.nodes[node.0].children.get(&folded) {
                Some(&child) => child,
                None => {
                    let child = NodeId(self.nodes.len());
                    self.nodes.push(Node::default());
                    self.nodes[node.0].children.insert(folded, child);
                    child
                }
            };
        }
        let slot = &mut self.nodes[node.0].key;
        if slot.is_none() {
            *slot = Some(crate::text::fold_join(key));
            self.candidates += 1;
        }
        Ok(node)
    }

    /// Follows the edge labeled with the case-folded `token`.
    pub fn step(&self, node: NodeId, token: &str) -> Result<Option<NodeId>, TrieError> {
        let n = self
            .nodes
            .get(node.0)
            .ok_or(TrieError::StaleHandle(node.0))?;
        if n.children.is_empty() {
            return Ok(None);
        }
        let needs_fold = !token.is_ascii() || token.bytes().any(|b| b.is_ascii_uppercase());
        let child = if needs_fold {
            n.children.get(fold(token).as_str())
        } else {
            n.children.get(token)
        };
        Ok(child.copied())
    }

    /// The candidate key stored at `node`, if it terminates a candidate.
    pub fn candidate_at(&self, node: NodeId) -> Result<Option<&str>, TrieError> {
        self.nodes
            .get(node.0)
            .map(|n| n.key.as_deref())
            .ok_or(TrieError::StaleHandle(node.0))
    }

    pub fn is_candidate(&self, node: NodeId) -> bool {
        matches!(self.candidate_at(node), Ok(Some(_)))
    }

    /// True iff exactly this token sequence was inserted (case-insensitive).
    pub fn contains<S: AsRef<str>>(&self, key: &[S]) -> bool {
        if key.is_empty() {
            return false;
        }
        let mut node = NodeId::ROOT;
        for token in key {
            match self.step(node, token.as_ref()) {
                Ok(Some(next)) => node = next,
                _ => return false,
            }
        }
        self.is_candidate(node)
    }

    /// Same as [`contains`](Self::contains) for a space-joined key.
    pub fn contains_key(&self, key: &str) -> bool {
        let tokens: Vec<&str> = key.split(' ').collect();
        self.contains(&tokens)
    }

    /// All candidate keys in sorted order.
    pub fn keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.nodes.iter().filter_map(|n| n.key.clone()).collect();
        keys.sort();
        keys
    }

    /// One candidate key per line, sorted.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for key in self.keys() {
            out.push_str(&key);
            out.push('\n');
        }
        out
    }

    /// Walks the whole structure and checks every node is reachable exactly
    /// once and every stored key spells its own path.
    pub fn check_integrity(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<(NodeId, Vec<&str>)> = vec![(NodeId::ROOT, Vec::new())];
        let mut candidates = 0;
        while let Some((id, path)) = stack.pop() {
            let Some(node) = self.nodes.get(id.0) else {
                return false;
            };
            if core::mem::replace(&mut seen[id.0], true) {
                return false;
            }
            if let Some(key) = &node.key {
                candidates += 1;
                if path.is_empty() || crate::text::join(&path) != *key {
                    return false;
                }
            }
            for (label, &child) in &node.children {
                let mut p = path.clone();
                p.push(label.as_str());
                stack.push((child, p));
            }
        }
        candidates == self.candidates && seen.iter().all(|&s| s)
    }
}
