use std::collections::{BTreeMap, VecDeque};

use super::{MapperError, MapperGraph};

/// Component index of every node. Components are numbered from 0 in order of
/// their smallest member id.
pub fn connected_components(graph: &MapperGraph) -> BTreeMap<usize, usize> {
    let adj = graph.adjacency();
    let mut component: BTreeMap<usize, usize> = BTreeMap::new();
    let mut next = 0;
    // BTreeMap iteration is by ascending id, so each new component starts at
    // its smallest member.
    for &start in adj.keys() {
        if component.contains_key(&start) {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        component.insert(start, next);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[&u] {
                if let std::collections::btree_map::Entry::Vacant(e) = component.entry(v) {
                    e.insert(next);
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    component
}

/// Sorted ids of the component containing `node`.
pub fn component_members(graph: &MapperGraph, node: usize) -> Result<Vec<usize>, MapperError> {
    let comps = connected_components(graph);
    let c = *comps.get(&node).ok_or(MapperError::UnknownNode(node))?;
    Ok(comps.into_iter().filter(|&(_, k)| k == c).map(|(id, _)| id).collect())
}

/// Minimum-hop path from `a` to `b`, inclusive of both ends.
///
/// Neighbours are expanded in ascending id order and each node keeps the
/// first parent that reached it, so ties resolve toward smaller ids.
pub fn shortest_path(graph: &MapperGraph, a: usize, b: usize) -> Result<Vec<usize>, MapperError> {
    let adj = graph.adjacency();
    for id in [a, b] {
        if !adj.contains_key(&id) {
            return Err(MapperError::UnknownNode(id));
        }
    }
    if a == b {
        return Ok(vec![a]);
    }
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([a]);
    parent.insert(a, a);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[&u] {
            if parent.contains_key(&v) {
                continue;
            }
            parent.insert(v, u);
            if v == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(v);
        }
    }
    Err(MapperError::NoPath { from: a, to: b })
}
