"""Reference values frozen into the encoding, optimizer and model tests."""
import math

print("sin(1), cos(1)             ", repr(math.sin(1)), repr(math.cos(1)))
w = 1 / math.sqrt(48)
print("sin(1/sqrt48), cos(1/sqrt48)", repr(math.sin(w)), repr(math.cos(w)))
print("sin(1e4), cos(1e4)         ", repr(math.sin(1e4)), repr(math.cos(1e4)))
print("delta limit d=32 T=48      ", repr(math.pi * 48 ** (30 / 32)))

lr, wd, eps = 1e-3, 1e-2, 1e-8
for theta, g in [(1.0, 0.5), (-2.0, -3.0), (0.25, 0.0)]:
    print("first AdamW step", theta, g, repr(theta * (1 - lr * wd) - lr * g / (abs(g) + eps)))


def lstm_params(i, h, head=(32, 32, 16), out=2):
    n = 4 * (h * (i + h) + h)
    prev = h
    for w in list(head) + [out]:
        n += prev * w + w
        prev = w
    return n


print("lstm count i=59 h=34 full  ", lstm_params(59, 34))
print("lstm recurrent i=110 h=34  ", 4 * (34 * 144 + 34))
