use rand::Rng;
use rand_distr::StandardNormal;

use crate::construction::{combine_mr, CodeSpec};
use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};
use crate::pmf::{normalize_in_place, Pmf};

/// AWGN at a given Eb/N0 for unit-energy antipodal signalling, with Eb
/// counted per information bit at the binary rate after puncturing and
/// repetition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub ebno_db: f64,
    pub sigma2: f64,
}

impl ChannelModel {
    pub fn new(ebno_db: f64, rate_bits: f64) -> Result<ChannelModel> {
        let ebno = 10f64.powf(ebno_db / 10.0);
        let sigma2 = 1.0 / (2.0 * rate_bits * ebno);
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Numeric(format!(
                "noise variance {sigma2} at Eb/N0 {ebno_db} dB, rate {rate_bits}"
            )));
        }
        Ok(ChannelModel { ebno_db, sigma2 })
    }

    pub fn for_spec(spec: &CodeSpec, ebno_db: f64) -> Result<ChannelModel> {
        ChannelModel::new(ebno_db, spec.rate())
    }

    pub fn from_sigma2(sigma2: f64) -> ChannelModel {
        ChannelModel {
            ebno_db: f64::NAN,
            sigma2,
        }
    }
}

/// Sends one symbol as `m` antipodal bits (bit `j` of the representation,
/// 0 -> +1) and returns the symbol p.m.f. given the noisy observations.
fn transmit_symbol<R: Rng + ?Sized>(
    field: &Field,
    symbol: FieldElement,
    sigma2: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let sigma = sigma2.sqrt();
    // log p(y | w) = sum_j y_j x_j(w) / sigma2 + const, built by doubling
    // over the bits.
    out[0] = 0.0;
    for j in 0..field.m() as usize {
        let x = if (symbol.0 >> j) & 1 == 0 { 1.0 } else { -1.0 };
        let noise: f64 = rng.sample(StandardNormal);
        let l = (x + sigma * noise) / sigma2;
        let half = 1 << j;
        for w in 0..half {
            let base = out[w];
            out[w] = base + l;
            out[w + half] = base - l;
        }
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.iter_mut().for_each(|x| *x = (*x - max).exp());
    normalize_in_place(out).expect("maximum term is one");
}

/// Channel p.m.f.s for every mother-codeword symbol. Punctured symbols get
/// the uniform p.m.f. and consume no channel use; replicas are transmitted
/// after the codeword and folded back onto their symbols.
pub fn modulate_and_transmit<R: Rng + ?Sized>(
    spec: &CodeSpec,
    codeword: &[FieldElement],
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<Vec<Pmf>> {
    let n = spec.n();
    if codeword.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: codeword.len(),
        });
    }
    let field = spec.field();
    let q = field.q();
    let mut buf = vec![0.0; q];
    let mut observe = |c: FieldElement, rng: &mut R| {
        transmit_symbol(field, c, channel.sigma2, rng, &mut buf);
        Pmf::new(buf.clone()).expect("normalized")
    };
    let original: Vec<Pmf> = (0..n)
        .map(|i| {
            if spec.puncture().is_punctured(i) {
                Pmf::uniform(q)
            } else {
                observe(codeword[i], rng)
            }
        })
        .collect();
    if spec.mr().factor() == 1 {
        return Ok(original);
    }
    let replicas: Vec<Vec<Pmf>> = spec
        .mr()
        .multipliers()
        .iter()
        .map(|mult| {
            (0..n)
                .map(|i| {
                    if spec.puncture().is_punctured(i) {
                        Pmf::uniform(q)
                    } else {
                        observe(field.mul(mult[i], codeword[i]), rng)
                    }
                })
                .collect()
        })
        .collect();
    combine_mr(field, &original, &replicas, spec.mr())
}
