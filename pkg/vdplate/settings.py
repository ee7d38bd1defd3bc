from visidata import vd


vd.option('plate_dt', 0.0, 'time step; 0 means min(1e-3, h**2)')
vd.option('plate_direct_max', 100000, 'interior dimension above which CG replaces the sparse direct factorization')
vd.option('plate_cg_rtol', 1e-13, 'relative tolerance for the preconditioned CG solve')
vd.option('plate_solve_rtol', 1e-10, 'largest acceptable relative residual of a reaction-biharmonic solve')
vd.option('plate_dense_max', 4096, 'largest interior dimension for the dense eigensolve')
vd.option('plate_admissible_tol', 5e-2, 'relative tolerance for the clamped boundary checks on initial data')
vd.option('plate_threads', 1, 'worker threads for independent ensemble members')
vd.option('plate_search_tol', 1e-3, 'absolute tolerance of the density contrast search')
vd.option('plate_search_samples', 9, 'coarse samples used to bracket the density contrast')
vd.option('plate_float_fmt', '{:.15g}', 'format of floats in saved tables')

PLATE_OPTIONS = ('plate_dt', 'plate_direct_max', 'plate_cg_rtol', 'plate_solve_rtol',
                 'plate_dense_max', 'plate_admissible_tol', 'plate_threads',
                 'plate_search_tol', 'plate_search_samples', 'plate_float_fmt')
