import numpy as np
from math import gamma
a=0.5; lam=0.1; u0=2.0
f=lambda u: u*u-lam*u
def run(T,N):
    h=T/N; u=np.zeros(N+1); u[0]=u0; fv=np.zeros(N+1); fv[0]=f(u0)
    k=np.arange(N+1,dtype=float)
    for n in range(N):
        j=np.arange(n+1)
        b=((n+1-j)**a-(n-j)**a)*h**a/gamma(a+1)
        up=u0+np.dot(b,fv[:n+1])
        aw=np.empty(n+1)
        aw[0]=n**(a+1)-(n-a)*(n+1)**a
        jj=j[1:]
        aw[1:]=(n-jj+2)**(a+1)+(n-jj)**(a+1)-2*(n-jj+1)**(a+1)
        c=h**a/gamma(a+2)
        u[n+1]=u0+c*(np.dot(aw,fv[:n+1])+f(up))
        fv[n+1]=f(u[n+1])
        if not np.isfinite(u[n+1]) or abs(u[n+1])>1e6:
            return (n+1)*h, u[n+1]
    return None
for N in [4000,16000]:
    print(N, run(0.06,N))
