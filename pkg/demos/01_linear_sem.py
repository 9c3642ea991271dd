"""When can a proxy bridge recover E[Y | do(x)] in a linear-Gaussian SEM?

Everything here is closed form. The script prints the conditional mutual
information I(U; Z | W, X) next to the mean relative bridge error for a few
noise settings, then shows the special ratio at which the error vanishes.
"""
# %%
import numpy as np

from causalbridge.sem import (SemParams, conditional_mi, cov_uz_given_wx, mean_relative_error,
                              sem_covariance)

base = SemParams(sigma_u=10.0, sigma_x=0.1)

# %% the joint covariance
joint = sem_covariance(base)
print(joint.order)
print(np.round(joint.cov, 2))

# %% noisier outcome proxies make the bridge worse
print("sigma_w   I(U;Z|W,X)   mean r")
for sw in (0.05, 0.2, 0.5, 1.0):
    p = SemParams(sigma_u=10.0, sigma_x=0.1, sigma_w=sw, sigma_z=0.5)
    print(f"{sw:7.2f}   {conditional_mi(p):10.4f}   {mean_relative_error(p, n_points=4000)[0]:.4f}")

# %% with unit coefficients, sigma_z == sigma_x makes U and Z independent given (W, X)
# ...and then the linear bridge is exact no matter how noisy W is
for sw in (0.1, 1.0, 3.0):
    p = SemParams(sigma_u=10.0, sigma_x=0.5, sigma_z=0.5, sigma_w=sw)
    print(sw, cov_uz_given_wx(p), conditional_mi(p), mean_relative_error(p, n_points=4000)[0])
