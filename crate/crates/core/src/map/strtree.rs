//! Sort-Tile-Recursive packed R-tree (Leutenegger et al., 1997).

use std::ops::Range;

use super::geometry::Rect;

pub const DEFAULT_NODE_CAPACITY: usize = 10;

#[derive(Debug, Clone)]
struct Node {
    rect: Rect,
    /// Children in the level below, or entries for leaves.
    children: Range<usize>,
}

/// Packed tree over rectangles. Entries carry caller-supplied `u32` values.
#[derive(Debug, Clone)]
pub struct StrTree {
    capacity: usize,
    /// Entries in leaf order.
    entries: Vec<(Rect, u32)>,
    /// `levels[0]` are leaves; the last level holds the root.
    levels: Vec<Vec<Node>>,
}

/// Orders items into STR tiles: vertical slices by x-center, then y-center within
/// each slice. `key` breaks ties so the result only depends on input contents.
fn str_order<T, K: Ord>(items: &mut [T], capacity: usize, rect: impl Fn(&T) -> Rect, key: impl Fn(&T) -> K) {
    let n = items.len();
    let leaves = n.div_ceil(capacity);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let slice_len = slices * capacity;
    let cmp_axis = |axis: usize| {
        let rect = &rect;
        let key = &key;
        move |a: &T, b: &T| rect(a).center()[axis].total_cmp(&rect(b).center()[axis]).then_with(|| key(a).cmp(&key(b)))
    };
    items.sort_by(cmp_axis(0));
    for chunk in items.chunks_mut(slice_len.max(1)) {
        chunk.sort_by(cmp_axis(1));
    }
}

fn bound(rects: impl Iterator<Item = Rect>) -> Rect {
    rects.fold(Rect::EMPTY, |acc, r| acc.union(&r))
}

impl StrTree {
    /// Bulk-loads `items`; ties in the sort are broken by `key`.
    pub fn build<K: Ord>(items: Vec<(Rect, u32)>, capacity: usize, key: impl Fn(u32) -> K) -> Self {
        assert!(capacity >= 2, "node capacity must be at least 2");
        let mut entries = items;
        str_order(&mut entries, capacity, |e| e.0, |e| key(e.1));
        let mut levels: Vec<Vec<Node>> = Vec::new();
        if entries.is_empty() {
            return StrTree { capacity, entries, levels };
        }
        let leaves: Vec<Node> = (0..entries.len())
            .step_by(capacity)
            .map(|s| {
                let children = s..(s + capacity).min(entries.len());
                Node { rect: bound(entries[children.clone()].iter().map(|e| e.0)), children }
            })
            .collect();
        levels.push(leaves);
        while levels.last().unwrap().len() > 1 {
            let below = levels.last_mut().unwrap();
            // Upper levels are tiled by the same rule; ties fall back to the position in
            // the level below, which is already deterministic.
            let mut tagged: Vec<(usize, Node)> = std::mem::take(below).into_iter().enumerate().collect();
            str_order(&mut tagged, capacity, |t| t.1.rect, |t| t.0);
            *below = tagged.into_iter().map(|t| t.1).collect();
            let n = below.len();
            let parents = (0..n)
                .step_by(capacity)
                .map(|s| {
                    let children = s..(s + capacity).min(n);
                    Node { rect: bound(below[children.clone()].iter().map(|c| c.rect)), children }
                })
                .collect();
            levels.push(parents);
        }
        StrTree { capacity, entries, levels }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of node levels; zero for an empty tree.
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn root_rect(&self) -> Option<Rect> {
        self.levels.last().map(|l| l[0].rect)
    }

    /// Visits every entry whose rectangle passes `keep`, pruning nodes that fail `keep_node`.
    fn search(&self, keep_node: impl Fn(&Rect) -> bool, mut visit: impl FnMut(&Rect, u32)) {
        let Some(top) = self.levels.len().checked_sub(1) else { return };
        let mut stack: Vec<(usize, usize)> = vec![(top, 0)];
        while let Some((level, i)) = stack.pop() {
            let node = &self.levels[level][i];
            if !keep_node(&node.rect) {
                continue;
            }
            if level == 0 {
                for (r, v) in &self.entries[node.children.clone()] {
                    visit(r, *v);
                }
            } else {
                stack.extend(node.children.clone().rev().map(|c| (level - 1, c)));
            }
        }
    }

    /// Values whose rectangle intersects `query` (closed intervals).
    pub fn query_rect(&self, query: &Rect) -> Vec<u32> {
        let mut out = Vec::new();
        self.search(|r| r.intersects(query), |r, v| {
            if r.intersects(query) {
                out.push(v)
            }
        });
        out
    }

    /// Values whose rectangle lies within `radius` of `p`. The bound is padded by a
    /// relative 1e-12 so floating-point rounding never drops a candidate that exact
    /// refinement would keep.
    pub fn query_radius(&self, p: [f64; 2], radius: f64) -> Vec<u32> {
        let limit = radius * (1.0 + 1e-12) + 1e-12;
        let mut out = Vec::new();
        self.search(|r| r.distance_to(p) <= limit, |r, v| {
            if r.distance_to(p) <= limit {
                out.push(v)
            }
        });
        out
    }

    /// Checks that every child lies within its parent and every entry sits in
    /// exactly one leaf.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.entries.is_empty() {
            return if self.levels.is_empty() { Ok(()) } else { Err("empty tree has nodes".into()) };
        }
        let mut seen = vec![0u32; self.entries.len()];
        for leaf in &self.levels[0] {
            if leaf.children.is_empty() || leaf.children.len() > self.capacity {
                return Err(format!("leaf fan-out {}", leaf.children.len()));
            }
            for e in leaf.children.clone() {
                seen[e] += 1;
                if !leaf.rect.contains(&self.entries[e].0) {
                    return Err(format!("entry {e} escapes its leaf"));
                }
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err("entries not partitioned by leaves".into());
        }
        for l in 1..self.levels.len() {
            let mut covered = vec![0u32; self.levels[l - 1].len()];
            for node in &self.levels[l] {
                if node.children.is_empty() || node.children.len() > self.capacity {
                    return Err(format!("level {l} fan-out {}", node.children.len()));
                }
                for c in node.children.clone() {
                    covered[c] += 1;
                    if !node.rect.contains(&self.levels[l - 1][c].rect) {
                        return Err(format!("level {} node {c} escapes its parent", l - 1));
                    }
                }
            }
            if covered.iter().any(|&c| c != 1) {
                return Err(format!("level {} nodes not partitioned", l - 1));
            }
        }
        if self.levels.last().unwrap().len() != 1 {
            return Err("more than one root".into());
        }
        Ok(())
    }
}
