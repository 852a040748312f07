/* Dead-branch fixture: the guarded call can never execute because the
 * condition compares a value with itself. volatile keeps gcc from
 * folding the comparison away at -O0, so the branch instruction is
 * really in the binary and a path-mode solve must prove it
 * unreachable rather than just not find it.
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

/* The unreachable target. Never called; exists so a path-mode request
 * has a concrete address to aim at. */
__attribute__((noinline)) static void unreachable_reward(void) {
    sys_write(1, "You cannot be here.\n", 20);
    sys_exit(2);
}

/* A reachable sibling so sat-vs-unsat is about the guard, not about
 * the engine failing to reach anything at all. */
__attribute__((noinline)) static void reachable_mark(void) {
    sys_write(1, "Done.\n", 6);
}

void _start(void) {
    char buf[1];
    volatile char x;

    if (sys_read(0, buf, 1) != 1)
        sys_exit(1);
    x = buf[0];
    if (x != x)
        unreachable_reward();
    reachable_mark();
    sys_exit(0);
}
