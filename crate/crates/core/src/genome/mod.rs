//! Random generation of typed individuals, plus the mutation and crossover
//! operators that evolve them.
//!
//! All operators are pure functions of their inputs and a caller-owned RNG:
//! identical seed and call sequence give identical outputs.

mod crossover;
mod mutate;

pub use crossover::{crossover, CrossoverKind};
pub use mutate::{mutate_individual, mutate_value, SPECIAL_CHARS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::individual::{Individual, TestIdGen};
use crate::service::MethodSignature;
use crate::value::{Value, ValueType};

/// Probability of emitting a null marker where the type permits one.
pub const NULL_PROBABILITY: f64 = 0.05;
/// Random strings are shorter than this many characters.
pub const MAX_RANDOM_STRING_LEN: usize = 64;
/// Random arrays are shorter than this many elements.
pub const MAX_RANDOM_ARRAY_LEN: usize = 8;
/// Finite range for random floats; boundary values come from the special set.
pub const FLOAT_RANGE: f64 = 1e6;
/// Probability that a random float is drawn from the special set.
const SPECIAL_FLOAT_PROBABILITY: f64 = 0.05;
/// Probability that a random string character is a non-ASCII scalar.
const MULTIBYTE_CHAR_PROBABILITY: f64 = 0.05;

/// Deterministic RNG for one logical stream of a campaign.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn random_string_content<R: Rng>(rng: &mut R, len: usize) -> String {
    (0..len)
        .map(|_| {
            if rng.gen_bool(MULTIBYTE_CHAR_PROBABILITY) {
                rng.gen::<char>()
            } else {
                char::from(rng.gen_range(0x20u8..=0x7e))
            }
        })
        .collect()
}

fn random_f64<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(SPECIAL_FLOAT_PROBABILITY) {
        let specials = [
            f64::MIN,
            f64::MAX,
            f64::MIN_POSITIVE,
            -f64::MIN_POSITIVE,
            f64::EPSILON,
            f64::NAN,
        ];
        specials[rng.gen_range(0..specials.len())]
    } else {
        rng.gen_range(-FLOAT_RANGE..=FLOAT_RANGE)
    }
}

fn random_f32<R: Rng>(rng: &mut R) -> f32 {
    if rng.gen_bool(SPECIAL_FLOAT_PROBABILITY) {
        let specials = [
            f32::MIN,
            f32::MAX,
            f32::MIN_POSITIVE,
            -f32::MIN_POSITIVE,
            f32::EPSILON,
            f32::NAN,
        ];
        specials[rng.gen_range(0..specials.len())]
    } else {
        rng.gen_range(-FLOAT_RANGE..=FLOAT_RANGE) as f32
    }
}

pub(crate) fn random_array_items<R: Rng>(elem: &ValueType, rng: &mut R) -> Vec<Value> {
    let len = rng.gen_range(0..MAX_RANDOM_ARRAY_LEN);
    (0..len).map(|_| random_value(elem, rng)).collect()
}

/// Draws a random value of type `t`. Integers are uniform over the full bit
/// width, strings are mostly printable ASCII, and nullable types yield a null
/// marker with probability [`NULL_PROBABILITY`].
pub fn random_value<R: Rng>(t: &ValueType, rng: &mut R) -> Value {
    if t.is_nullable() && rng.gen_bool(NULL_PROBABILITY) {
        return Value::Null(Box::new(t.clone()));
    }
    match t {
        ValueType::Boolean => Value::Boolean(rng.gen()),
        ValueType::Byte => Value::Byte(rng.gen()),
        ValueType::Short => Value::Short(rng.gen()),
        ValueType::Integer => Value::Integer(rng.gen()),
        ValueType::Long => Value::Long(rng.gen()),
        ValueType::Char => Value::Char(rng.gen()),
        ValueType::Float => Value::Float(random_f32(rng)),
        ValueType::Double => Value::Double(random_f64(rng)),
        ValueType::String => {
            let len = rng.gen_range(0..MAX_RANDOM_STRING_LEN);
            Value::Str(random_string_content(rng, len))
        }
        ValueType::Array(elem) => Value::Array {
            elem: elem.clone(),
            items: random_array_items(elem, rng),
        },
        ValueType::Object { class_name, fields } => Value::Object {
            class_name: class_name.clone(),
            fields: fields
                .iter()
                .map(|(n, ty)| (n.clone(), random_value(ty, rng)))
                .collect(),
        },
    }
}

/// Draws a fresh individual matching the signature, with a new test id.
pub fn random_individual<R: Rng>(
    sig: &MethodSignature,
    ids: &TestIdGen,
    rng: &mut R,
) -> Individual {
    Individual {
        id: ids.next_id(),
        method: sig.id,
        inputs: sig.params.iter().map(|p| random_value(p, rng)).collect(),
    }
}

// Valid unicode scalar values, skipping the surrogate gap.
const SURROGATE_START: u32 = 0xD800;
const SURROGATE_LEN: u32 = 0x800;
const SCALAR_COUNT: u32 = 0x11_0000 - SURROGATE_LEN;

pub(crate) fn char_to_index(c: char) -> u32 {
    let code = c as u32;
    if code >= SURROGATE_START + SURROGATE_LEN {
        code - SURROGATE_LEN
    } else {
        code
    }
}

pub(crate) fn index_to_char(idx: u32) -> char {
    let idx = idx % SCALAR_COUNT;
    let code = if idx < SURROGATE_START { idx } else { idx + SURROGATE_LEN };
    char::from_u32(code).expect("index maps to a valid scalar")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::MethodId;
    use crate::individual::validate_individual;

    #[test]
    fn boolean_values_cover_the_codomain() {
        let mut rng = seeded_rng(1, 0);
        let mut seen = [false, false];
        for _ in 0..64 {
            match random_value(&ValueType::Boolean, &mut rng) {
                Value::Boolean(b) => seen[b as usize] = true,
                other => panic!("wrong type: {other:?}"),
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn array_elements_have_the_declared_type() {
        let mut rng = seeded_rng(2, 0);
        let ty = ValueType::Array(Box::new(ValueType::Integer));
        for _ in 0..100 {
            let v = random_value(&ty, &mut rng);
            assert_eq!(v.value_type(), ty);
            assert!(v.is_well_formed());
        }
    }

    #[test]
    fn same_seed_same_stream_reproduces_values() {
        let ty = ValueType::Array(Box::new(ValueType::String));
        let a = random_value(&ty, &mut seeded_rng(42, 0));
        let b = random_value(&ty, &mut seeded_rng(42, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn streams_are_independent() {
        let a: u64 = seeded_rng(42, 0).gen();
        let b: u64 = seeded_rng(42, 1).gen();
        assert_ne!(a, b);
    }

    #[test]
    fn empty_signature_gives_empty_inputs() {
        let sig = MethodSignature { id: MethodId(3), name: "ping".into(), params: vec![] };
        let ids = TestIdGen::new();
        let ind = random_individual(&sig, &ids, &mut seeded_rng(1, 0));
        assert!(ind.inputs.is_empty());
        assert!(validate_individual(&ind, &sig));
    }

    #[test]
    fn individuals_match_arity_and_get_distinct_ids() {
        let sig = MethodSignature {
            id: MethodId(0),
            name: "m".into(),
            params: vec![ValueType::String, ValueType::Integer, ValueType::Integer],
        };
        let ids = TestIdGen::new();
        let mut rng = seeded_rng(7, 0);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..10 {
            let ind = random_individual(&sig, &ids, &mut rng);
            assert_eq!(ind.inputs.len(), 3);
            assert!(validate_individual(&ind, &sig));
            assert!(seen.insert(ind.id));
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn char_index_mapping_is_a_bijection_on_scalars() {
        for code in [0u32, 0x41, 0xD7FF, 0xE000, 0x1F600, 0x10FFFF] {
            let c = char::from_u32(code).unwrap();
            assert_eq!(index_to_char(char_to_index(c)), c);
        }
        // Wrapping never produces a surrogate.
        for idx in [0xD7FF, 0xD800, 0xDFFF, SCALAR_COUNT - 1, SCALAR_COUNT, u32::MAX] {
            let _ = index_to_char(idx);
        }
    }
}
