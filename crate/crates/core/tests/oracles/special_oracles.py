import mpmath as mp
mp.mp.dps=40
def logK(n,x): return mp.log(mp.besselk(n,x))
for (n,x) in [(52,300),(0.5,1),(1.5,2),(600,1e-6),(600,1e5),(0.5,1e5),(0.5,1e-6),(13,1.25),(62.5,3.7),(3.3,0.7),(0.1,0.01),(250,40),(0.0,1.0),(1.0,1e-3),(100,100),(12.5,0.05)]:
    print("logK",n,x, mp.nstr(logK(n,x),20))
def kp(n,x): return mp.diff(lambda t: mp.log(t**n*mp.besselk(n,t)), x)
print("kprime 10 5", mp.nstr(kp(10,5),20))
def skpdf(y,nu,g):
    nu=mp.mpf(nu); g=mp.mpf(g); y=mp.mpf(y)
    if g==0:
        return mp.gamma((nu+1)/2)/(mp.sqrt(nu*mp.pi)*mp.gamma(nu/2))*(1+y*y/nu)**(-(nu+1)/2)
    a=abs(g); n=(nu+1)/2; Q=y*y
    c=2**(1-nu/2)*nu**(nu/2)*a**n/(mp.sqrt(2*mp.pi)*mp.gamma(nu/2))
    return c*mp.exp(y*g)*mp.besselk(n,a*mp.sqrt(nu+Q))/(nu+Q)**(n/2)
def cdf(y,nu,g): return mp.quad(lambda t: skpdf(t,nu,g),[-mp.inf,-50,-10,-3,0,y] if y>0 else [-mp.inf,-50,-10,y])
print("int", mp.nstr(mp.quad(lambda t: skpdf(t,25,-0.25),[-mp.inf,-10,0,10,mp.inf]),20))
print("cdf 25 -0.25 0", mp.nstr(cdf(0,25,-0.25),20))
print("cdf 25 -0.25 1", mp.nstr(cdf(1,25,-0.25),20))
print("cdf 5 0.25 -2", mp.nstr(cdf(-2,5,0.25),20))
q=mp.findroot(lambda y: cdf(y,25,-0.25)-mp.mpf('0.01'), -2.8)
print("q 25 -0.25 0.01", mp.nstr(q,20))
q2=mp.findroot(lambda y: cdf(y,25,0)-mp.mpf('0.975'), 2.0)
print("tq 25 0.975", mp.nstr(q2,20))
q3=mp.findroot(lambda y: cdf(y,25,-0.25)-mp.mpf('0.9'), 1.0)
print("q 25 -0.25 0.9", mp.nstr(q3,20))
# bivariate copula density d=2 skew t nu=25 g=-0.25 rho=0.5 at u=(0.9,0.9)
nu=mp.mpf(25); g=mp.mpf(-0.25); rho=mp.mpf(0.5); d=2
y=[q3,q3]
Rinv=mp.matrix([[1,-rho],[-rho,1]])/(1-rho**2)
det=1-rho**2
gv=mp.matrix([g,g]); yv=mp.matrix(y)
Q=(yv.T*Rinv*yv)[0]; a2=(gv.T*Rinv*gv)[0]; a=mp.sqrt(a2); yb=(yv.T*Rinv*gv)[0]
n=(nu+d)/2
lg=(1-nu/2)*mp.log(2)+nu/2*mp.log(nu)+n*mp.log(a)-d/2*mp.log(2*mp.pi)-mp.loggamma(nu/2)-mp.log(det)/2+yb+mp.log(mp.besselk(n,a*mp.sqrt(nu+Q)))-n/2*mp.log(nu+Q)
lc=lg-2*mp.log(skpdf(q3,25,-0.25))
print("copula 2d", mp.nstr(lc,20), "logg", mp.nstr(lg,20))
