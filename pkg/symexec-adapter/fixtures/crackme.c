/* Keyed crackme fixture: reads 8 bytes, checks a per-byte transform
 * against a baked-in table, and prints "Good Job." only for the one
 * correct key. Freestanding on purpose: the engine models raw
 * syscalls, not libc. Build only through build.py so the flags stay
 * pinned.
 *
 * The key itself never appears in the binary. table[i] holds
 * ((key[i] ^ XORK[i]) + ADDK[i]) & 0xff for key "s3cr3tk9".
 */

typedef unsigned long u64;

static long sys_read(int fd, char *buf, u64 n) {
    long ret;
    __asm__ volatile ("syscall"
                      : "=a"(ret)
                      : "a"(0L), "D"((long)fd), "S"(buf), "d"(n)
                      : "rcx", "r11", "memory");
    return ret;
}

static long sys_write(int fd, const char *buf, u64 n) {
    long ret;
    __asm__ volatile ("syscall"
                      : "=a"(ret)
                      : "a"(1L), "D"((long)fd), "S"(buf), "d"(n)
                      : "rcx", "r11", "memory");
    return ret;
}

static void sys_exit(int code) {
    __asm__ volatile ("syscall" : : "a"(60L), "D"((long)code));
    __builtin_unreachable();
}

#define KEYLEN 8

static const unsigned char xork[KEYLEN] = {0x5a, 0x13, 0x77, 0x2e, 0x41, 0x9c, 0x08, 0x63};
static const unsigned char addk[KEYLEN] = {0x11, 0x40, 0x07, 0x2a, 0x99, 0x05, 0x7f, 0x1c};
static const unsigned char table[KEYLEN] = {0x3a, 0x60, 0x1b, 0x86, 0x0b, 0xed, 0xe2, 0x76};

static void reject(void) {
    sys_write(1, "Try again.\n", 11);
    sys_exit(1);
}

/* solve_path fixtures aim here; kept out of line so the symbol has a
 * stable address of its own. */
__attribute__((noinline)) static void accept(void) {
    sys_write(1, "Good Job.\n", 10);
    sys_exit(0);
}

void _start(void) {
    char buf[KEYLEN];
    long got;
    int i;
    unsigned char t;

    got = sys_read(0, buf, KEYLEN);
    if (got != KEYLEN)
        reject();
    for (i = 0; i < KEYLEN; i++) {
        t = (unsigned char)(((unsigned char)buf[i] ^ xork[i]) + addk[i]);
        if (t != table[i])
            reject();
    }
    accept();
}
