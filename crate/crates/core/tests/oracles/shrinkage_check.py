import numpy as np
import os
exec(open(os.path.join(os.path.dirname(__file__), 'stylized_design.py')).read().split('for bc')[0])
def qs(lh, q, h, unhatted=None):
    li=1/lh; d=len(lh)
    out=[]
    for i in range(d):
        D=li-li[i]; den=D**2+h**2*li**2
        S=np.mean(li*D/den); Rr=np.mean(li*h*li/den)
        inv=(1-q)**2*li[i]+2*q*(1-q)*li[i]*S+q**2*li[i]*(S**2+Rr**2)
        out.append(1/inv)
    return np.array(out)
def bw(d,T):
    q=d/T; return min(q*q,1/q**2)**0.35*d**-0.35
print(bw(100,1000), bw(100,100))
rng=np.random.default_rng(1)
for T in [1000,250]:
    M=R(1.5); L=np.linalg.cholesky(M); d=100
    X=rng.standard_normal((T,d))@L.T
    C=X.T@X/T
    lh=np.sort(np.linalg.eigvalsh(C))[::-1]
    lc=qs(lh,d/T,bw(d,T))
    print(T, lh[:3], lh[-3:]); print(' shr', lc[:3], lc[-3:], 'sum', lh.sum(), lc.sum())
    print(' monotone', np.all(np.diff(lc)<=0))
lh=np.array([30,10]+[0.16]*98); print(qs(lh,0.1,bw(100,1000))[[0,1,50]])
