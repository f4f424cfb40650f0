//! Problem-text generators for the block and network domains.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::DomainError;

/// Random towers over `blocks`, bottom first.
pub fn random_towers<R: Rng + ?Sized>(blocks: &[String], rng: &mut R) -> Vec<Vec<String>> {
    let mut order = blocks.to_vec();
    order.shuffle(rng);
    let mut towers: Vec<Vec<String>> = Vec::new();
    for b in order {
        match towers.last_mut() {
            Some(t) if rng.random_bool(0.5) => t.push(b),
            _ => towers.push(vec![b]),
        }
    }
    towers
}

pub fn word_blocks(words: &[String]) -> Result<Vec<String>, DomainError> {
    if words.is_empty() {
        return Err(DomainError::Generation("empty word set".into()));
    }
    let mut blocks: Vec<String> = Vec::new();
    for w in words {
        let letters: Vec<char> = w.chars().collect();
        if letters.is_empty() || !letters.iter().all(|c| c.is_ascii_lowercase()) {
            return Err(DomainError::Generation(format!("`{w}` is not a lowercase word")));
        }
        let mut sorted = letters.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != letters.len() {
            return Err(DomainError::Generation(format!("`{w}` repeats a letter and cannot be one tower")));
        }
        for c in letters {
            let b = c.to_string();
            if !blocks.contains(&b) {
                blocks.push(b);
            }
        }
    }
    blocks.sort();
    Ok(blocks)
}

fn tower_goal(word: &str) -> String {
    let letters: Vec<char> = word.chars().collect();
    let mut parts: Vec<String> = letters.windows(2).map(|w| format!("(on {} {})", w[0], w[1])).collect();
    parts.push(format!("(ontable {})", letters[letters.len() - 1]));
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

/// A block-words problem whose goals spell `words` top to bottom, from a
/// random initial arrangement that satisfies none of them.
pub fn block_words_problem<R: Rng + ?Sized>(name: &str, words: &[String], rng: &mut R) -> Result<String, DomainError> {
    let blocks = word_blocks(words)?;
    let towers = loop {
        let t = random_towers(&blocks, rng);
        let spelled =
            |w: &String| t.iter().any(|tower| tower.iter().rev().map(String::as_str).collect::<String>() == *w);
        if !words.iter().any(spelled) {
            break t;
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {name}) (:domain block-words)");
    let _ = writeln!(out, "  (:objects {} - block)", blocks.join(" "));
    out.push_str("  (:init (handempty)");
    for t in &towers {
        let _ = write!(out, "\n    (ontable {})", t[0]);
        for w in t.windows(2) {
            let _ = write!(out, " (on {} {})", w[1], w[0]);
        }
        let _ = write!(out, " (clear {})", t[t.len() - 1]);
    }
    out.push_str(")\n  (:goals\n");
    for w in words {
        let _ = writeln!(out, "    ({w} {})", tower_goal(w));
    }
    out.push_str("  ))\n");
    Ok(out)
}

pub const ATTACKS: [(&str, &str); 4] =
    [("vandalism", "defaced"), ("data-theft", "data-stolen"), ("backdoor", "backdoor-installed"), ("wipe", "wiped")];

/// An intrusion-detection problem over `hosts` servers paired into random
/// groups of two; one goal per (attack, group).
pub fn intrusion_problem<R: Rng + ?Sized>(name: &str, hosts: usize, rng: &mut R) -> Result<String, DomainError> {
    if hosts < 2 || !hosts.is_multiple_of(2) {
        return Err(DomainError::Generation(format!("need an even number of hosts, got {hosts}")));
    }
    let names: Vec<String> = (1..=hosts).map(|i| format!("host{i}")).collect();
    let mut order = names.clone();
    order.shuffle(rng);
    let mut groups: Vec<[String; 2]> = order
        .chunks(2)
        .map(|c| {
            let mut g = [c[0].clone(), c[1].clone()];
            g.sort_by_key(|h| h[4..].parse::<usize>().unwrap());
            g
        })
        .collect();
    groups.sort_by_key(|g| g[0][4..].parse::<usize>().unwrap());
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {name}) (:domain intrusion-detection)");
    let _ = writeln!(out, "  (:objects {} - host)", names.join(" "));
    out.push_str("  (:init)\n  (:goals\n");
    for (attack, pred) in ATTACKS {
        for [a, b] in &groups {
            let _ = writeln!(out, "    ({attack}-{a}-{b} (and ({pred} {a}) ({pred} {b})))");
        }
    }
    out.push_str("  ))\n");
    Ok(out)
}
