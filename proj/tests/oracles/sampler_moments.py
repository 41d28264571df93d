"""Exact mean/variance of the strided reverse sampler for N(mu, sd^2) data.

With the exact noise predictor every transition is affine in x plus Gaussian
noise, so the first two moments propagate in closed form.
"""
import numpy as np
K=1000; beta=np.concatenate([[0],np.linspace(1e-4,2e-2,K)]); a=np.sqrt(np.cumprod(1-beta)); s=np.sqrt(1-a**2)
mu,sd=1.5,0.5
def idx(steps):
    if steps==1: return [K]
    return [K-(2*i*(K-1)+steps-1)//(2*(steps-1)) for i in range(steps)]
for eta in (0,1):
  for steps in (1000,250,50):
    m,v=0.0,1.0; I=idx(steps)
    for i,k in enumerate(I):
        kp=I[i+1] if i+1<len(I) else 0
        if kp==0: w=0
        else: w=np.sqrt(max(0,eta**2*s[kp]**2*(1-(s[kp]**2/s[k]**2)*(a[k]**2/a[kp]**2))))
        r=a[kp]/a[k]; c=np.sqrt(max(0,s[kp]**2-w*w))-s[k]*r; g=s[k]/(a[k]**2*sd**2+s[k]**2)
        A=r+c*g; B=-c*g*a[k]*mu
        m=A*m+B; v=A*A*v+w*w
    print(f"{eta} {steps} {m/mu:.12f} {v/sd**2:.12f}")
