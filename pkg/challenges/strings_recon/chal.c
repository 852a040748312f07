/* Warmup reversing target: the flag sits in .rodata among decoys.
 * Running the binary tells you nothing; reading it does. */
#include <stdio.h>
#include <string.h>

static const char *banner = "hypercube maintenance shell v0.3";
static const char *decoy1 = "password: hunter2";
static const char *decoy2 = "TODO: rotate the real credentials";
static const char *secret = "flag{str1ngs_t3ll_t4l3s}";

int main(int argc, char **argv) {
    (void)argv;
    puts(banner);
    if (argc > 9) {
        /* unreachable in practice; keeps the decoys and flag live */
        puts(decoy1);
        puts(decoy2);
        puts(secret);
    }
    puts("nothing to see here.");
    return 0;
}
