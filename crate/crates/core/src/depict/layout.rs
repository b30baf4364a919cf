//! 2D coordinates for skeletal drawings: rings as regular polygons, chains as
//! 120° zigzags, then a short relaxation that only moves clashing atoms.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DepictError;
use crate::chem::{canonical_ranks, BondOrder, MolecularGraph};

/// Non-bonded atoms closer than this are pushed apart during relaxation.
const CLASH_DISTANCE: f64 = 0.9;
const RELAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout2D {
    /// Per-atom coordinates in bond-length units, indexed like the graph
    /// that was laid out.
    pub coords: Vec<(f64, f64)>,
    /// Atoms that were not placed because they belong to a smaller fragment.
    pub omitted: Vec<usize>,
}

impl Layout2D {
    pub fn is_placed(&self, atom: usize) -> bool {
        !self.omitted.contains(&atom)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.coords[a], self.coords[b]);
        (p.0 - q.0).hypot(p.1 - q.1)
    }
}

type P = (f64, f64);

fn add(a: P, b: P) -> P {
    (a.0 + b.0, a.1 + b.1)
}

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn norm(a: P) -> f64 {
    a.0.hypot(a.1)
}

fn polar(angle: f64) -> P {
    (angle.cos(), angle.sin())
}

fn angle_of(v: P) -> f64 {
    v.1.atan2(v.0)
}

/// Smallest set of short cycles covering every ring bond, each as an atom
/// cycle in traversal order.
pub fn perceive_rings(graph: &MolecularGraph) -> Vec<Vec<usize>> {
    let bridges = graph.bridges();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for (b, bond) in graph.bonds().iter().enumerate() {
        if bridges.contains(&b) {
            continue;
        }
        if let Some(path) = shortest_path_avoiding(graph, bond.begin, bond.end, b) {
            let mut key = path.clone();
            key.sort_unstable();
            if seen.insert(key) {
                candidates.push(path);
            }
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    // keep a cycle only if it covers a bond not yet covered
    let mut covered: HashSet<(usize, usize)> = HashSet::new();
    let mut rings = Vec::new();
    for cycle in candidates {
        let edges: Vec<(usize, usize)> = (0..cycle.len())
            .map(|i| {
                let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
                (a.min(b), a.max(b))
            })
            .collect();
        if edges.iter().any(|e| !covered.contains(e)) {
            covered.extend(edges);
            rings.push(cycle);
        }
    }
    rings
}

fn shortest_path_avoiding(graph: &MolecularGraph, from: usize, to: usize, skip_bond: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; graph.atom_count()];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        if a == to {
            break;
        }
        for &(nb, b) in graph.neighbors(a) {
            if b != skip_bond && prev[nb] == usize::MAX {
                prev[nb] = a;
                queue.push_back(nb);
            }
        }
    }
    if prev[to] == usize::MAX {
        return None;
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

struct Builder<'g> {
    graph: &'g MolecularGraph,
    ranks: Vec<usize>,
    pos: Vec<Option<P>>,
    rings: Vec<Vec<usize>>,
    ring_of_atom: Vec<Vec<usize>>,
}

impl<'g> Builder<'g> {
    fn centroid(&self, atoms: impl Iterator<Item = usize>) -> Option<P> {
        let mut sum = (0.0, 0.0);
        let mut n = 0.0;
        for a in atoms {
            if let Some(p) = self.pos[a] {
                sum = add(sum, p);
                n += 1.0;
            }
        }
        (n > 0.0).then(|| (sum.0 / n, sum.1 / n))
    }

    /// Places every ring fused, spiro- or bridge-connected to `seed_ring`,
    /// given that at least one atom of `seed_ring` may already be placed.
    fn place_ring_system(&mut self, seed_ring: usize, placed_rings: &mut [bool]) {
        let mut queue = vec![seed_ring];
        while let Some(r) = queue.pop() {
            if placed_rings[r] {
                continue;
            }
            self.place_ring(r);
            placed_rings[r] = true;
            // next: the unplaced ring sharing the most placed atoms
            let mut best: Option<(usize, usize)> = None;
            for (i, ring) in self.rings.iter().enumerate() {
                if placed_rings[i] {
                    continue;
                }
                let shared = ring.iter().filter(|&&a| self.pos[a].is_some()).count();
                if shared > 0 && best.is_none_or(|(_, s)| shared > s) {
                    best = Some((i, shared));
                }
            }
            if let Some((i, _)) = best {
                queue.push(i);
            }
        }
    }

    fn place_ring(&mut self, r: usize) {
        let ring = self.rings[r].clone();
        let n = ring.len();
        let placed: Vec<usize> = (0..n).filter(|&i| self.pos[ring[i]].is_some()).collect();
        match placed.len() {
            0 => {
                // start at the lowest-ranked atom, polygon centred at origin
                let start = (0..n).min_by_key(|&i| self.ranks[ring[i]]).expect("ring is nonempty");
                let radius = 0.5 / (PI / n as f64).sin();
                let offset = if n % 2 == 0 { PI / n as f64 } else { PI / 2.0 };
                for k in 0..n {
                    let angle = offset + 2.0 * PI * k as f64 / n as f64;
                    let p = polar(angle);
                    self.pos[ring[(start + k) % n]] = Some((radius * p.0, radius * p.1));
                }
            }
            1 => {
                // spiro: polygon hanging off the shared atom, away from its
                // placed neighbours
                let i = placed[0];
                let a = ring[i];
                let pa = self.pos[a].expect("placed");
                let away = self.free_direction(a);
                let radius = 0.5 / (PI / n as f64).sin();
                let centre = add(pa, (radius * away.cos(), radius * away.sin()));
                let start_angle = angle_of(sub(pa, centre));
                for k in 1..n {
                    let angle = start_angle + 2.0 * PI * k as f64 / n as f64;
                    let p = polar(angle);
                    let atom = ring[(i + k) % n];
                    if self.pos[atom].is_none() {
                        self.pos[atom] = Some(add(centre, (radius * p.0, radius * p.1)));
                    }
                }
            }
            _ => {
                // Find the longest run of unplaced ring atoms; its flanking
                // placed atoms anchor a polygon arc on the far side.
                let mut best_run: Option<(usize, usize)> = None;
                for s in 0..n {
                    if self.pos[ring[s]].is_none() || self.pos[ring[(s + 1) % n]].is_some() {
                        continue;
                    }
                    let mut len = 0;
                    while self.pos[ring[(s + 1 + len) % n]].is_none() {
                        len += 1;
                    }
                    if best_run.is_none_or(|(_, l)| len > l) {
                        best_run = Some((s, len));
                    }
                }
                let Some((s, len)) = best_run else { return };
                let a = self.pos[ring[s]].expect("placed");
                let b = self.pos[ring[(s + len + 1) % n]].expect("placed");
                let system_centre = self
                    .centroid(self.ring_atoms_placed())
                    .unwrap_or((0.0, 0.0));
                let m = len + 2;
                let chord = norm(sub(b, a)).max(1e-6);
                let side = chord.max(1.0);
                let radius = 0.5 * side / (PI / m as f64).sin();
                // centre on the perpendicular bisector of ab, away from the
                // already placed atoms
                let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
                let ab = sub(b, a);
                let mut normal = (-ab.1 / chord, ab.0 / chord);
                if (mid.0 - system_centre.0) * normal.0 + (mid.1 - system_centre.1) * normal.1 < 0.0 {
                    normal = (-normal.0, -normal.1);
                }
                let h = (radius * radius - chord * chord / 4.0).max(0.0).sqrt();
                let centre = add(mid, (h * normal.0, h * normal.1));
                let start = angle_of(sub(a, centre));
                let end = angle_of(sub(b, centre));
                // sweep from a to b through the side away from the system
                let mut sweep = end - start;
                let far = angle_of(normal);
                let mid_angle = |sw: f64| start + sw / 2.0;
                let facing = |ang: f64| (ang - far).cos();
                let alt = if sweep > 0.0 { sweep - 2.0 * PI } else { sweep + 2.0 * PI };
                if facing(mid_angle(alt)) > facing(mid_angle(sweep)) {
                    sweep = alt;
                }
                for k in 1..=len {
                    let angle = start + sweep * k as f64 / (len + 1) as f64;
                    let p = polar(angle);
                    self.pos[ring[(s + k) % n]] = Some(add(centre, (radius * p.0, radius * p.1)));
                }
                if ring.iter().any(|&a| self.pos[a].is_none()) {
                    self.place_ring(r);
                }
            }
        }
    }

    fn ring_atoms_placed(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.pos.len()).filter(|&a| self.pos[a].is_some() && !self.ring_of_atom[a].is_empty())
    }

    /// Direction (radians) pointing into the largest empty sector around
    /// `atom`.
    fn free_direction(&self, atom: usize) -> f64 {
        let p = self.pos[atom].expect("placed");
        let mut angles: Vec<f64> = self
            .graph
            .neighbors(atom)
            .iter()
            .filter_map(|&(nb, _)| self.pos[nb].map(|q| angle_of(sub(q, p))))
            .collect();
        if angles.is_empty() {
            return 0.0;
        }
        angles.sort_by(f64::total_cmp);
        let mut best = (0.0, angles[0] + PI);
        for i in 0..angles.len() {
            let a = angles[i];
            let b = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + 2.0 * PI };
            if b - a > best.0 + 1e-9 {
                best = (b - a, a + (b - a) / 2.0);
            }
        }
        best.1
    }

    fn repulsion(&self, candidate: P, exclude: usize) -> f64 {
        self.pos
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != exclude)
            .filter_map(|(_, p)| *p)
            .map(|q| {
                let d2 = (candidate.0 - q.0).powi(2) + (candidate.1 - q.1).powi(2);
                1.0 / d2.max(1e-6)
            })
            .sum()
    }

    fn is_linear(&self, atom: usize) -> bool {
        let orders: Vec<BondOrder> = self
            .graph
            .neighbors(atom)
            .iter()
            .map(|&(_, b)| self.graph.bonds()[b].order)
            .collect();
        orders.len() == 2
            && (orders.contains(&BondOrder::Triple) || orders.iter().all(|&o| o == BondOrder::Double))
    }

    /// Directions for the unplaced neighbours of a placed atom.
    fn child_directions(&self, atom: usize, k: usize) -> Vec<f64> {
        let p = self.pos[atom].expect("placed");
        let placed: Vec<f64> = self
            .graph
            .neighbors(atom)
            .iter()
            .filter_map(|&(nb, _)| self.pos[nb].map(|q| angle_of(sub(q, p))))
            .collect();
        if placed.is_empty() {
            return match k {
                1 => vec![PI / 6.0],
                2 => vec![PI / 6.0, 5.0 * PI / 6.0],
                _ => (0..k).map(|i| PI / 2.0 + 2.0 * PI * i as f64 / k as f64).collect(),
            };
        }
        if placed.len() == 1 {
            let incoming = placed[0] + PI;
            if k == 1 {
                if self.is_linear(atom) {
                    return vec![incoming];
                }
                let options = [incoming + PI / 3.0, incoming - PI / 3.0];
                let best = options
                    .iter()
                    .copied()
                    .min_by(|x, y| {
                        let ex = self.repulsion(add(p, polar(*x)), atom);
                        let ey = self.repulsion(add(p, polar(*y)), atom);
                        ex.total_cmp(&ey)
                    })
                    .expect("two options");
                return vec![best];
            }
        }
        // spread evenly across the widest empty sector
        let mut sorted = placed.clone();
        sorted.sort_by(f64::total_cmp);
        let mut gap = (0.0, 0.0);
        for i in 0..sorted.len() {
            let a = sorted[i];
            let b = if i + 1 < sorted.len() { sorted[i + 1] } else { sorted[0] + 2.0 * PI };
            if b - a > gap.1 - gap.0 + 1e-9 {
                gap = (a, b);
            }
        }
        let width = gap.1 - gap.0;
        (1..=k).map(|i| gap.0 + width * i as f64 / (k + 1) as f64).collect()
    }
}

/// Lays out the largest connected fragment of `graph`. Ties between equally
/// large fragments go to the one holding the lowest atom index.
pub fn layout_2d(graph: &MolecularGraph) -> Result<Layout2D, DepictError> {
    let n = graph.atom_count();
    if n == 0 {
        return Err(DepictError::EmptyGraph);
    }
    let components = graph.connected_components();
    let main = components
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .map(|(_, c)| c.clone())
        .expect("nonempty graph");
    let keep: BTreeSet<usize> = main.iter().copied().collect();
    let omitted: Vec<usize> = (0..n).filter(|a| !keep.contains(a)).collect();
    if !omitted.is_empty() {
        log::warn!(
            "{}: laying out the largest fragment only ({} of {} atoms)",
            graph.source_text(),
            main.len(),
            n
        );
    }

    let ranks = canonical_ranks(graph);
    let rings: Vec<Vec<usize>> = perceive_rings(graph)
        .into_iter()
        .filter(|r| keep.contains(&r[0]))
        .collect();
    let mut ring_of_atom = vec![Vec::new(); n];
    for (i, r) in rings.iter().enumerate() {
        for &a in r {
            ring_of_atom[a].push(i);
        }
    }
    let mut b = Builder {
        graph,
        ranks,
        pos: vec![None; n],
        rings,
        ring_of_atom,
    };
    let mut placed_rings = vec![false; b.rings.len()];

    let root = *main.iter().min_by_key(|&&a| (b.ranks[a], a)).expect("nonempty");
    if let Some(&r) = b.ring_of_atom[root].first() {
        b.place_ring_system(r, &mut placed_rings);
    } else {
        b.pos[root] = Some((0.0, 0.0));
    }

    // breadth-first growth from every placed atom
    let mut queue: VecDeque<usize> = (0..n).filter(|&a| b.pos[a].is_some()).collect();
    let mut sorted_queue: Vec<usize> = queue.drain(..).collect();
    sorted_queue.sort_by_key(|&a| b.ranks[a]);
    queue.extend(sorted_queue);
    while let Some(atom) = queue.pop_front() {
        let mut fresh: Vec<usize> = graph
            .neighbors(atom)
            .iter()
            .map(|&(nb, _)| nb)
            .filter(|&nb| b.pos[nb].is_none())
            .collect();
        if fresh.is_empty() {
            continue;
        }
        fresh.sort_by_key(|&nb| (b.ranks[nb], nb));
        let dirs = b.child_directions(atom, fresh.len());
        let p = b.pos[atom].expect("placed");
        for (&nb, &dir) in fresh.iter().zip(&dirs) {
            let target = add(p, polar(dir));
            if let Some(&r) = b.ring_of_atom[nb].first() {
                let before: Vec<bool> = b.pos.iter().map(Option::is_some).collect();
                attach_ring_system(&mut b, r, nb, target, dir, &mut placed_rings);
                let mut added: Vec<usize> = (0..n).filter(|&a| b.pos[a].is_some() && !before[a]).collect();
                added.sort_by_key(|&a| b.ranks[a]);
                queue.extend(added);
            } else {
                b.pos[nb] = Some(target);
                queue.push_back(nb);
            }
        }
    }

    let mut coords: Vec<P> = b.pos.iter().map(|p| p.unwrap_or((0.0, 0.0))).collect();
    relax(graph, &mut coords, &main, &b.ranks);
    if coords.iter().any(|c| !c.0.is_finite() || !c.1.is_finite()) {
        return Err(DepictError::LayoutFailure(graph.source_text().to_string()));
    }
    Ok(Layout2D { coords, omitted })
}

/// Lays the ring system containing `entry` out on its own, then moves it
/// rigidly so that `entry` sits at `target` and the system extends along
/// `dir`.
fn attach_ring_system(
    b: &mut Builder<'_>,
    ring: usize,
    entry: usize,
    target: P,
    dir: f64,
    placed_rings: &mut [bool],
) {
    let before: Vec<Option<P>> = b.pos.clone();
    let mut scratch = Builder {
        graph: b.graph,
        ranks: b.ranks.clone(),
        pos: vec![None; b.pos.len()],
        rings: b.rings.clone(),
        ring_of_atom: b.ring_of_atom.clone(),
    };
    let mut scratch_rings = placed_rings.to_vec();
    scratch.place_ring_system(ring, &mut scratch_rings);
    let local: Vec<usize> = (0..scratch.pos.len()).filter(|&a| scratch.pos[a].is_some() && before[a].is_none()).collect();
    let Some(entry_local) = scratch.pos[entry] else { return };
    let centre = scratch.centroid(local.iter().copied()).unwrap_or(entry_local);
    let mut current = angle_of(sub(centre, entry_local));
    if norm(sub(centre, entry_local)) < 1e-9 {
        current = 0.0;
    }
    let rotation = dir - current;
    let (s, c) = rotation.sin_cos();
    for &a in &local {
        let v = sub(scratch.pos[a].expect("placed"), entry_local);
        let rotated = (v.0 * c - v.1 * s, v.0 * s + v.1 * c);
        b.pos[a] = Some(add(target, rotated));
    }
    for (i, done) in scratch_rings.iter().enumerate() {
        placed_rings[i] |= *done;
    }
}

fn relax(graph: &MolecularGraph, coords: &mut [P], atoms: &[usize], ranks: &[usize]) {
    let mut order: Vec<usize> = atoms.to_vec();
    order.sort_by_key(|&a| (ranks[a], a));
    let bonded: HashSet<(usize, usize)> = graph
        .bonds()
        .iter()
        .map(|bd| (bd.begin.min(bd.end), bd.begin.max(bd.end)))
        .collect();
    for _ in 0..RELAX_ITERATIONS {
        let mut moved = 0.0f64;
        for (x, &i) in order.iter().enumerate() {
            for &j in &order[x + 1..] {
                if bonded.contains(&(i.min(j), i.max(j))) {
                    continue;
                }
                let d = sub(coords[j], coords[i]);
                let dist = norm(d);
                if dist >= CLASH_DISTANCE {
                    continue;
                }
                let dir = if dist < 1e-9 {
                    // coincident atoms: separate along a rank-dependent axis
                    polar((ranks[i] * 7 + ranks[j] * 13) as f64)
                } else {
                    (d.0 / dist, d.1 / dist)
                };
                let push = (CLASH_DISTANCE - dist) / 4.0;
                coords[i] = sub(coords[i], (dir.0 * push, dir.1 * push));
                coords[j] = add(coords[j], (dir.0 * push, dir.1 * push));
                moved = moved.max(push);
            }
        }
        if moved == 0.0 {
            break;
        }
        for bd in graph.bonds() {
            let d = sub(coords[bd.end], coords[bd.begin]);
            let dist = norm(d).max(1e-9);
            let corr = (dist - 1.0) / 4.0;
            let unit = (d.0 / dist, d.1 / dist);
            coords[bd.begin] = add(coords[bd.begin], (unit.0 * corr, unit.1 * corr));
            coords[bd.end] = sub(coords[bd.end], (unit.0 * corr, unit.1 * corr));
        }
    }
}
