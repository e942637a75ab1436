//! Symbols and the per-computation symbol table.
//!
//! Names are plain identifiers (`[A-Za-z][A-Za-z0-9]*`); derivative
//! coordinates use a single underscore suffix whose letters are independent
//! variable names (`u_yy`, `theta_x`). The suffix letters are canonically
//! sorted in independent-variable order, so `u_yx` and `u_xy` resolve to the
//! same symbol.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Independent,
    Dependent,
    Parameter,
    Jet,
    FunctionArg,
    GroupParam,
}

/// An interned name with a role. Ordering is by role rank, then name, which
/// fixes the default variable order used for canonical polynomial forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    name: Arc<str>,
    kind: SymbolKind,
}

impl Symbol {
    pub fn new(name: &str, kind: SymbolKind) -> Self {
        Symbol {
            name: Arc::from(name),
            kind,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.kind, self.name.as_ref()).cmp(&(other.kind, other.name.as_ref()))
    }
}

impl core::fmt::Display for Symbol {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.name)
    }
}

/// Resolution context for parsing and jet-symbol bookkeeping.
///
/// Exactly one context exists per system under analysis; every symbol that
/// appears in any expression of that computation is registered here.
#[derive(Debug, Clone, Default)]
pub struct SymbolContext {
    by_name: BTreeMap<String, Symbol>,
    aliases: BTreeMap<String, String>,
    functions: BTreeSet<String>,
    independents: Vec<Symbol>,
    dependents: Vec<Symbol>,
}

impl SymbolContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn independents(&self) -> &[Symbol] {
        &self.independents
    }

    pub fn dependents(&self) -> &[Symbol] {
        &self.dependents
    }

    fn insert(&mut self, sym: Symbol) -> Symbol {
        self.by_name.insert(sym.name().to_string(), sym.clone());
        sym
    }

    pub fn add_independent(&mut self, name: &str) -> Symbol {
        let s = Symbol::new(name, SymbolKind::Independent);
        self.independents.push(s.clone());
        self.insert(s)
    }

    pub fn add_dependent(&mut self, name: &str) -> Symbol {
        let s = Symbol::new(name, SymbolKind::Dependent);
        self.dependents.push(s.clone());
        self.insert(s)
    }

    pub fn add_parameter(&mut self, name: &str) -> Symbol {
        self.insert(Symbol::new(name, SymbolKind::Parameter))
    }

    pub fn add_symbol(&mut self, name: &str, kind: SymbolKind) -> Symbol {
        self.insert(Symbol::new(name, kind))
    }

    /// Register `alias` as an alternative input spelling of `target`.
    pub fn add_alias(&mut self, alias: &str, target: &str) {
        self.aliases.insert(alias.to_string(), target.to_string());
    }

    /// Register an opaque function name, so `name(...)` parses as an
    /// application node.
    pub fn add_function(&mut self, name: &str) {
        self.functions.insert(name.to_string());
    }

    pub fn is_function(&self, name: &str) -> bool {
        self.functions.contains(name)
    }

    fn canonical_name<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map(String::as_str).unwrap_or(name)
    }

    /// Resolve a plain (non-jet) identifier, alias-aware.
    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.by_name.get(self.canonical_name(name)).cloned()
    }

    fn independent_index(&self, letter: &str) -> Option<usize> {
        self.independents.iter().position(|s| s.name() == letter)
    }

    pub fn dependent_index(&self, name: &str) -> Option<usize> {
        let canon = self.canonical_name(name);
        self.dependents.iter().position(|s| s.name() == canon)
    }

    /// Canonical jet-symbol name for dependent index `dep` and per-independent
    /// derivative counts. Order zero is the dependent itself.
    pub fn jet_name(&self, dep: usize, counts: &[u32]) -> String {
        let mut name = self.dependents[dep].name().to_string();
        if counts.iter().all(|&c| c == 0) {
            return name;
        }
        name.push('_');
        for (i, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                name.push_str(self.independents[i].name());
            }
        }
        name
    }

    /// The symbol for a jet coordinate (order zero returns the dependent).
    pub fn jet_symbol(&self, dep: usize, counts: &[u32]) -> Symbol {
        if counts.iter().all(|&c| c == 0) {
            return self.dependents[dep].clone();
        }
        Symbol::new(&self.jet_name(dep, counts), SymbolKind::Jet)
    }

    /// Split a `dep_letters` jet name into (dependent index, counts).
    /// Returns `None` when the prefix is not a dependent or a letter is not
    /// an independent variable.
    pub fn split_jet_name(&self, name: &str) -> Option<(usize, Vec<u32>)> {
        let (head, tail) = name.split_once('_')?;
        let dep = self.dependent_index(head)?;
        let mut counts = alloc::vec![0u32; self.independents.len()];
        for ch in tail.chars() {
            let mut buf = [0u8; 4];
            let idx = self.independent_index(ch.encode_utf8(&mut buf))?;
            counts[idx] += 1;
        }
        Some((dep, counts))
    }

    /// Resolve any identifier: plain symbol, alias, or jet name.
    pub fn resolve(&self, name: &str) -> Option<Symbol> {
        if name.contains('_') {
            let (dep, counts) = self.split_jet_name(name)?;
            Some(self.jet_symbol(dep, &counts))
        } else {
            self.lookup(name)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> SymbolContext {
        let mut c = SymbolContext::new();
        c.add_independent("x");
        c.add_independent("y");
        c.add_dependent("u");
        c.add_dependent("theta");
        c.add_parameter("Gr");
        c.add_alias("t", "theta");
        c
    }

    #[test]
    fn jet_names_canonicalize() {
        let c = ctx();
        assert_eq!(c.resolve("u_yx").unwrap().name(), "u_xy");
        assert_eq!(c.resolve("theta_yy").unwrap().name(), "theta_yy");
        assert_eq!(c.jet_symbol(0, &[0, 0]).name(), "u");
    }

    #[test]
    fn aliases_resolve_for_plain_and_jet_names() {
        let c = ctx();
        assert_eq!(c.resolve("t").unwrap().name(), "theta");
        assert_eq!(c.resolve("t_x").unwrap().name(), "theta_x");
    }

    #[test]
    fn unknown_letters_fail() {
        let c = ctx();
        assert!(c.resolve("u_xz").is_none());
        assert!(c.resolve("w_x").is_none());
    }
}
