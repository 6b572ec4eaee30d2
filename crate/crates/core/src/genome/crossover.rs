//! Cascade crossover: an outer stage slices at parameter granularity, and the
//! parameter at each cut point is itself crossed at inner granularity — bits
//! of the binary representation for primitives, characters for strings,
//! elements for arrays, and fields for objects.
//!
//! Inner point sequences of unequal length are indexed over the shorter
//! length; the tail comes from the parent owning the post-cut side. If either
//! side of an inner cross is a null marker, there are no inner points and the
//! offspring takes one parent's value whole.

use rand::Rng;

use crate::individual::{Individual, TestIdGen};
use crate::value::Value;

/// The three crossover operators; one is drawn uniformly per invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverKind {
    SinglePoint,
    TwoPoints,
    Uniform,
}

/// Number of inner crossover points of a value.
pub(crate) fn point_count(v: &Value) -> usize {
    match v {
        Value::Boolean(_) => 1,
        Value::Byte(_) => 8,
        Value::Short(_) => 16,
        Value::Integer(_) | Value::Char(_) | Value::Float(_) => 32,
        Value::Long(_) | Value::Double(_) => 64,
        Value::Str(s) => s.chars().count(),
        Value::Array { items, .. } => items.len(),
        Value::Object { fields, .. } => fields.len(),
        Value::Null(_) => 0,
    }
}

fn prim_bits(v: &Value) -> (u64, u32) {
    match *v {
        Value::Boolean(b) => (b as u64, 1),
        Value::Byte(x) => (x as u8 as u64, 8),
        Value::Short(x) => (x as u16 as u64, 16),
        Value::Integer(x) => (x as u32 as u64, 32),
        Value::Long(x) => (x as u64, 64),
        // Chars cross over in the surrogate-free index space so that
        // reconstruction is the exact inverse of extraction.
        Value::Char(c) => (super::char_to_index(c) as u64, 32),
        Value::Float(x) => (x.to_bits() as u64, 32),
        Value::Double(x) => (x.to_bits(), 64),
        _ => unreachable!("not a primitive: {v:?}"),
    }
}

fn prim_from_bits(template: &Value, bits: u64) -> Value {
    match template {
        Value::Boolean(_) => Value::Boolean(bits & 1 == 1),
        Value::Byte(_) => Value::Byte(bits as u8 as i8),
        Value::Short(_) => Value::Short(bits as u16 as i16),
        Value::Integer(_) => Value::Integer(bits as u32 as i32),
        Value::Long(_) => Value::Long(bits as i64),
        // Bit mixing can leave the scalar range; wrap back onto valid scalars.
        Value::Char(_) => Value::Char(super::index_to_char(bits as u32)),
        Value::Float(_) => Value::Float(f32::from_bits(bits as u32)),
        Value::Double(_) => Value::Double(f64::from_bits(bits)),
        _ => unreachable!("not a primitive: {template:?}"),
    }
}

fn width_mask(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Mask selecting the `k` most significant points of a `width`-bit value.
/// Point 0 is the most significant bit, mirroring left-to-right reading of
/// character and element sequences.
fn top_mask(k: usize, width: u32) -> u64 {
    if k == 0 {
        0
    } else if k as u32 >= width {
        width_mask(width)
    } else {
        width_mask(width) & !(width_mask(width) >> k)
    }
}

fn is_primitive(v: &Value) -> bool {
    matches!(
        v,
        Value::Boolean(_)
            | Value::Byte(_)
            | Value::Short(_)
            | Value::Integer(_)
            | Value::Long(_)
            | Value::Char(_)
            | Value::Float(_)
            | Value::Double(_)
    )
}

fn seq_points(v: &Value) -> Vec<Value> {
    match v {
        Value::Str(s) => s.chars().map(Value::Char).collect(),
        Value::Array { items, .. } => items.clone(),
        Value::Object { fields, .. } => fields.iter().map(|(_, v)| v.clone()).collect(),
        _ => unreachable!("not a sequence: {v:?}"),
    }
}

fn seq_rebuild(template: &Value, points: Vec<Value>) -> Value {
    match template {
        Value::Str(_) => Value::Str(
            points
                .into_iter()
                .map(|p| match p {
                    Value::Char(c) => c,
                    other => unreachable!("string point is a char, got {other:?}"),
                })
                .collect(),
        ),
        Value::Array { elem, .. } => Value::Array { elem: elem.clone(), items: points },
        Value::Object { class_name, fields } => Value::Object {
            class_name: class_name.clone(),
            fields: fields
                .iter()
                .zip(points)
                .map(|((n, _), v)| (n.clone(), v))
                .collect(),
        },
        _ => unreachable!("not a sequence: {template:?}"),
    }
}

/// Inner single point: points `[0, cut)` from `pre`, the rest (including the
/// tail beyond the shorter length) from `post`. `cut` must not exceed the
/// shorter point count.
pub(crate) fn inner_single(pre: &Value, post: &Value, cut: usize) -> Value {
    if is_primitive(pre) {
        let (a, w) = prim_bits(pre);
        let (b, _) = prim_bits(post);
        let m = top_mask(cut, w);
        return prim_from_bits(pre, (a & m) | (b & !m));
    }
    let a = seq_points(pre);
    let b = seq_points(post);
    debug_assert!(cut <= a.len().min(b.len()));
    let mut out: Vec<Value> = a[..cut].to_vec();
    out.extend_from_slice(&b[cut..]);
    // Rebuild against the post parent: it owns the tail, so for objects the
    // field count matches and for arrays/strings the length equals post's.
    seq_rebuild(post, out)
}

/// Inner two points: `[k1, k2)` from `inner`, everything else from `outer`.
pub(crate) fn inner_two(inner: &Value, outer: &Value, k1: usize, k2: usize) -> Value {
    debug_assert!(k1 <= k2);
    if is_primitive(inner) {
        let (a, w) = prim_bits(inner);
        let (b, _) = prim_bits(outer);
        let mid = top_mask(k2, w) & !top_mask(k1, w);
        return prim_from_bits(inner, (a & mid) | (b & !mid));
    }
    let a = seq_points(inner);
    let b = seq_points(outer);
    debug_assert!(k2 <= a.len().min(b.len()));
    let mut out: Vec<Value> = b[..k1].to_vec();
    out.extend_from_slice(&a[k1..k2]);
    out.extend_from_slice(&b[k2..]);
    seq_rebuild(outer, out)
}

/// Inner uniform: every point independently from either parent; the tail
/// beyond the shorter length comes from the second parent.
pub(crate) fn inner_uniform<R: Rng>(a: &Value, b: &Value, rng: &mut R) -> Value {
    if a.is_null() || b.is_null() {
        return if rng.gen::<bool>() { a.clone() } else { b.clone() };
    }
    if is_primitive(a) {
        let (x, w) = prim_bits(a);
        let (y, _) = prim_bits(b);
        let m = rng.gen::<u64>() & width_mask(w);
        return prim_from_bits(a, (x & m) | (y & !m));
    }
    let pa = seq_points(a);
    let pb = seq_points(b);
    let n = pa.len().min(pb.len());
    let mut out = Vec::with_capacity(pb.len().max(n));
    for i in 0..n {
        out.push(if rng.gen::<bool>() { pa[i].clone() } else { pb[i].clone() });
    }
    out.extend_from_slice(&pb[n..]);
    seq_rebuild(b, out)
}

/// Crosses the boundary parameter with a single inner cut drawn by `rng`.
/// Null on either side short-circuits to one whole parent, coin-flipped.
fn boundary_single<R: Rng>(pre: &Value, post: &Value, rng: &mut R) -> Value {
    if pre.is_null() || post.is_null() {
        return if rng.gen::<bool>() { pre.clone() } else { post.clone() };
    }
    let max_cut = point_count(pre).min(point_count(post));
    let cut = rng.gen_range(0..=max_cut);
    inner_single(pre, post, cut)
}

/// Single point at parameter granularity: outer cut `c` in `0..=arity`,
/// params before `c` from the first parent, after `c` from the second, and
/// the parameter at the boundary (when `c < arity`) inner-crossed.
pub(crate) fn single_point_inputs<R: Rng>(
    p1: &[Value],
    p2: &[Value],
    c: usize,
    rng: &mut R,
) -> Vec<Value> {
    let arity = p1.len();
    (0..arity)
        .map(|i| {
            if i < c {
                p1[i].clone()
            } else if i == c {
                boundary_single(&p1[i], &p2[i], rng)
            } else {
                p2[i].clone()
            }
        })
        .collect()
}

/// Two points at parameter granularity: the inner region `[c1, c2)` comes
/// from the first parent, the outer parts from the second, and the params at
/// the two cuts are inner-crossed. Coincident cuts degenerate to a single
/// boundary parameter receiving an inner two-point cross.
pub(crate) fn two_points_inputs<R: Rng>(
    p1: &[Value],
    p2: &[Value],
    c1: usize,
    c2: usize,
    rng: &mut R,
) -> Vec<Value> {
    debug_assert!(c1 <= c2);
    let arity = p1.len();
    (0..arity)
        .map(|i| {
            if i == c1 && c1 == c2 {
                let (a, b) = (&p1[i], &p2[i]);
                if a.is_null() || b.is_null() {
                    if rng.gen::<bool>() { a.clone() } else { b.clone() }
                } else {
                    let max_cut = point_count(a).min(point_count(b));
                    let k1 = rng.gen_range(0..=max_cut);
                    let k2 = rng.gen_range(0..=max_cut);
                    inner_two(a, b, k1.min(k2), k1.max(k2))
                }
            } else if i == c1 {
                // Entering the inner region: pre-cut side belongs to p2.
                boundary_single(&p2[i], &p1[i], rng)
            } else if i == c2 {
                // Leaving the inner region: pre-cut side belongs to p1.
                boundary_single(&p1[i], &p2[i], rng)
            } else if i > c1 && i < c2 {
                p1[i].clone()
            } else {
                p2[i].clone()
            }
        })
        .collect()
}

/// Uniform at parameter granularity: each param whole from either parent,
/// then one uniformly chosen param additionally inner-crossed point by point.
pub(crate) fn uniform_inputs<R: Rng>(p1: &[Value], p2: &[Value], rng: &mut R) -> Vec<Value> {
    let arity = p1.len();
    let mut out: Vec<Value> = (0..arity)
        .map(|i| if rng.gen::<bool>() { p1[i].clone() } else { p2[i].clone() })
        .collect();
    if arity > 0 {
        let idx = rng.gen_range(0..arity);
        out[idx] = inner_uniform(&p1[idx], &p2[idx], rng);
    }
    out
}

/// Applies one uniformly drawn crossover operator in cascade mode and assigns
/// the offspring a fresh test id. Parents must target the same method.
pub fn crossover<R: Rng>(
    p1: &Individual,
    p2: &Individual,
    ids: &TestIdGen,
    rng: &mut R,
) -> Individual {
    assert_eq!(
        p1.method, p2.method,
        "crossover parents must target the same method"
    );
    assert_eq!(
        p1.inputs.len(),
        p2.inputs.len(),
        "crossover parents must have equal arity"
    );
    let arity = p1.inputs.len();
    let kind = match rng.gen_range(0..3) {
        0 => CrossoverKind::SinglePoint,
        1 => CrossoverKind::TwoPoints,
        _ => CrossoverKind::Uniform,
    };
    let inputs = match kind {
        CrossoverKind::SinglePoint => {
            let c = rng.gen_range(0..=arity);
            single_point_inputs(&p1.inputs, &p2.inputs, c, rng)
        }
        CrossoverKind::TwoPoints => {
            let a = rng.gen_range(0..=arity);
            let b = rng.gen_range(0..=arity);
            two_points_inputs(&p1.inputs, &p2.inputs, a.min(b), a.max(b), rng)
        }
        CrossoverKind::Uniform => uniform_inputs(&p1.inputs, &p2.inputs, rng),
    };
    Individual { id: ids.next_id(), method: p1.method, inputs }
}
