"""Built-in mini-language programs: small numeric and array algorithms."""

from __future__ import annotations

from .mutate import MiniProgram

_SOURCES = {
    "bitwiseOr": """
int bitwiseOr(int a, int b) {
    int c = a | b;
    return c;
}
""",
    "arraySum": """
int arraySum(int[] a, int n) {
    int sum = 0;
    for (int i = 0; i < n; i = i + 1) {
        sum = sum + a[i];
    }
    return sum;
}
""",
    "bubbleSort": """
void bubbleSort(int[] a, int n) {
    for (int i = 0; i < n - 1; i = i + 1) {
        for (int j = 0; j < n - i - 1; j = j + 1) {
            if (a[j] > a[j + 1]) {
                int tmp = a[j];
                a[j] = a[j + 1];
                a[j + 1] = tmp;
            }
        }
    }
}
""",
    "absDiff": """
int absDiff(int a, int b) {
    int d = a - b;
    if (d < 0) {
        d = -d;
    }
    return d;
}
""",
    "elementwiseMax": """
void elementwiseMax(int[] a, int[] b, int[] c, int n) {
    int i = 0;
    while (i < n) {
        if (a[i] >= b[i]) {
            c[i] = a[i];
        } else {
            c[i] = b[i];
        }
        i = i + 1;
    }
}
""",
    "calVariance": """
float calVariance(float[] x, int n) {
    float mean = 0;
    for (int i = 0; i < n; i = i + 1) {
        mean = mean + x[i];
    }
    mean = mean / n;
    float var = 0;
    for (int j = 0; j < n; j = j + 1) {
        float d = x[j] - mean;
        var = var + d * d;
    }
    var = var / n;
    return var;
}
""",
    "bitwiseAnd": """
int bitwiseAnd(int a, int b) {
    int c = a & b;
    return c;
}
""",
    "countZeros": """
int countZeros(int[] a, int n) {
    int count = 0;
    for (int i = 0; i < n; i = i + 1) {
        if (a[i] == 0) {
            count = count + 1;
        }
    }
    return count;
}
""",
    "heapSort": """
void heapSort(int[] a, int n) {
    int start = n / 2 - 1;
    while (start >= 0) {
        int root = start;
        int child = 2 * root + 1;
        while (child < n) {
            if (child + 1 < n) {
                if (a[child] < a[child + 1]) {
                    child = child + 1;
                }
            }
            if (a[root] < a[child]) {
                int t = a[root];
                a[root] = a[child];
                a[child] = t;
                root = child;
                child = 2 * root + 1;
            } else {
                child = n;
            }
        }
        start = start - 1;
    }
    int end = n - 1;
    while (end > 0) {
        int s = a[0];
        a[0] = a[end];
        a[end] = s;
        int r = 0;
        int c = 1;
        while (c < end) {
            if (c + 1 < end) {
                if (a[c] < a[c + 1]) {
                    c = c + 1;
                }
            }
            if (a[r] < a[c]) {
                int u = a[r];
                a[r] = a[c];
                a[c] = u;
                r = c;
                c = 2 * r + 1;
            } else {
                c = end;
            }
        }
        end = end - 1;
    }
}
""",
    "maxOfTwo": """
int maxOfTwo(int a, int b) {
    int m = b;
    if (a > b) {
        m = a;
    }
    return m;
}
""",
    "arrayDivision": """
void arrayDivision(float[] a, float[] b, float[] c, int n) {
    for (int i = 0; i < n; i = i + 1) {
        if (b[i] != 0) {
            c[i] = a[i] / b[i];
        } else {
            c[i] = 0;
        }
    }
}
""",
    "dotProduct": """
int dotProduct(int[] a, int[] b, int n) {
    int s = 0;
    int i = 0;
    while (i < n) {
        s = s + a[i] * b[i];
        i = i + 1;
    }
    return s;
}
""",
    "average": """
float average(float a, float b, float c) {
    float m = (a + b + c) / 3;
    return m;
}
""",
    "linearSearch": """
int linearSearch(int[] a, int n, int key) {
    int pos = -1;
    int i = 0;
    while (i < n) {
        if (a[i] == key) {
            pos = i;
            i = n;
        } else {
            i = i + 1;
        }
    }
    return pos;
}
""",
    "insertionSort": """
void insertionSort(int[] a, int n) {
    for (int i = 1; i < n; i = i + 1) {
        int key = a[i];
        int j = i - 1;
        while (j >= 0 & a[j] > key) {
            a[j + 1] = a[j];
            j = j - 1;
        }
        a[j + 1] = key;
    }
}
""",
    "maskedXor": """
int maskedXor(int a, int b, int mask) {
    int c = (a ^ b) & mask;
    return c;
}
""",
    "binarySearch": """
int binarySearch(int[] a, int n, int key) {
    int lo = 0;
    int hi = n - 1;
    int found = -1;
    while (lo <= hi) {
        int mid = (lo + hi) / 2;
        if (a[mid] == key) {
            found = mid;
            lo = hi + 1;
        } else {
            if (a[mid] < key) {
                lo = mid + 1;
            } else {
                hi = mid - 1;
            }
        }
    }
    return found;
}
""",
    "isEven": """
int isEven(int x) {
    int r = x & 1;
    int e = r == 0;
    return e;
}
""",
    "selectionSort": """
void selectionSort(int[] a, int n) {
    for (int i = 0; i < n - 1; i = i + 1) {
        int best = i;
        for (int j = i + 1; j < n; j = j + 1) {
            if (a[j] < a[best]) {
                best = j;
            }
        }
        int t = a[i];
        a[i] = a[best];
        a[best] = t;
    }
}
""",
    "gcd": """
int gcd(int a, int b) {
    while (b != 0) {
        int t = a % b;
        a = b;
        b = t;
    }
    return a;
}
""",
    "countBits": """
int countBits(int x) {
    int count = 0;
    while (x != 0) {
        count = count + (x & 1);
        x = x / 2;
    }
    return count;
}
""",
    "power": """
int power(int base, int exp) {
    int result = 1;
    while (exp > 0) {
        if ((exp & 1) == 1) {
            result = result * base;
        }
        base = base * base;
        exp = exp / 2;
    }
    return result;
}
""",
    "reverseArray": """
void reverseArray(int[] a, int n) {
    int i = 0;
    int j = n - 1;
    while (i < j) {
        int t = a[i];
        a[i] = a[j];
        a[j] = t;
        i = i + 1;
        j = j - 1;
    }
}
""",
    "factorial": """
int factorial(int n) {
    int f = 1;
    for (int i = 2; i <= n; i = i + 1) {
        f = f * i;
    }
    return f;
}
""",
    "elementwiseMin": """
void elementwiseMin(int[] a, int[] b, int[] c, int n) {
    for (int i = 0; i < n; i = i + 1) {
        if (a[i] <= b[i]) {
            c[i] = a[i];
        } else {
            c[i] = b[i];
        }
    }
}
""",
    "clamp": """
int clamp(int x, int lo, int hi) {
    int y = x;
    if (y < lo) {
        y = lo;
    } else if (y > hi) {
        y = hi;
    }
    return y;
}
""",
    "isPrime": """
int isPrime(int n) {
    int prime = 1;
    if (n < 2) {
        prime = 0;
    }
    int d = 2;
    while (d * d <= n) {
        if (n % d == 0) {
            prime = 0;
        }
        d = d + 1;
    }
    return prime;
}
""",
    "fibonacci": """
int fibonacci(int n) {
    int a = 0;
    int b = 1;
    for (int i = 0; i < n; i = i + 1) {
        int t = a + b;
        a = b;
        b = t;
    }
    return a;
}
""",
    "matrixMultiply": """
void matrixMultiply(int[] a, int[] b, int[] c, int n) {
    for (int i = 0; i < n; i = i + 1) {
        for (int j = 0; j < n; j = j + 1) {
            int acc = 0;
            for (int k = 0; k < n; k = k + 1) {
                acc = acc + a[i * n + k] * b[k * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}
""",
    "prefixSum": """
void prefixSum(int[] a, int[] out, int n) {
    int run = 0;
    for (int i = 0; i < n; i = i + 1) {
        run = run + a[i];
        out[i] = run;
    }
}
""",
}


def builtin_programs() -> list[MiniProgram]:
    return [MiniProgram(name, src.strip() + "\n") for name, src in _SOURCES.items()]
