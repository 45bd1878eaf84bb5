use minor_process_lab::ensembles::{sample_wigner, EnsembleSpec, EntryLaw, Symmetry};
use minor_process_lab::linalg::{eigh_complex, eigh_real};
use minor_process_lab::rng::{stream, Purpose};

fn main() {
    for &(n, sym) in &[
        (600usize, Symmetry::Complex),
        (800, Symmetry::Real),
        (800, Symmetry::Complex),
        (2000, Symmetry::Real),
    ] {
        let spec = EnsembleSpec { symmetry: sym, entry_law: EntryLaw::Gaussian, dimension: n };
        let mut rng = stream(1, 0, Purpose::Sample);
        let h = sample_wigner(&spec, &mut rng);
        let t0 = std::time::Instant::now();
        let vals = match sym {
            Symmetry::Real => eigh_real(&h.real_view(), false).unwrap().0,
            Symmetry::Complex => eigh_complex(h.entries(), false).unwrap().0,
        };
        let t1 = t0.elapsed();
        let t0 = std::time::Instant::now();
        match sym {
            Symmetry::Real => {
                eigh_real(&h.real_view(), true).unwrap();
            }
            Symmetry::Complex => {
                eigh_complex(h.entries(), true).unwrap();
            }
        }
        let t2 = t0.elapsed();
        println!("n={n} {sym:?}: values-only {t1:?}, full {t2:?}, top={:.4}", vals[n - 1]);
    }
}
