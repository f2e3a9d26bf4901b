pub mod lookup;
pub mod modulus;
pub mod ntt;
pub mod prime;
pub mod rns;
pub mod sampling;

pub use lookup::{build_lookup_table, lookup_mod, LookupTable};
pub use modulus::{add_mod, inv_mod, mul_mod, neg_mod, pow_mod, sub_mod, Modulus};
pub use ntt::{intt_bm, intt_mm, ntt_bm, ntt_dispatch, ntt_mm, NttPolicy, NttTables, NttVariant};
pub use prime::{find_primitive_root, gen_ntt_prime, gen_ntt_primes, is_prime};
pub use rns::{crt_reconstruct, RnsBase};
pub use sampling::{sample_error, sample_ternary, sample_uniform, Rng};
