/* Classic unchecked copy: the guard word sits right after the buffer
 * inside one struct, so layout is fixed by the standard and the
 * overwrite is deterministic at -O0. */
#include <stdio.h>
#include <string.h>

struct input_state {
    char buf[16];
    volatile unsigned int guard;
};

int main(void) {
    struct input_state st;
    char line[128];

    st.guard = 0;
    printf("access code: ");
    fflush(stdout);
    if (!fgets(line, sizeof line, stdin)) {
        puts("no input");
        return 2;
    }
    line[strcspn(line, "\n")] = '\0';
    strcpy(st.buf, line);  /* the bug under test */

    if (st.guard != 0) {
        puts("flag{smash3d_th3_st4ck}");
        return 0;
    }
    puts("access denied");
    return 1;
}
