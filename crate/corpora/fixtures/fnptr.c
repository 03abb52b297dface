typedef struct _IO_FILE FILE;
typedef unsigned long size_t;

extern FILE *stdin;
extern size_t fread(void *ptr, size_t size, size_t nmemb, FILE *stream);
extern int printf(const char *format, ...);
extern void exit(int status);
extern void *memcpy(void *dest, const void *src, size_t n);

int read_len(FILE *f) {
  int v;
  fread((char *)&v, 4, 1, f);
  return v;
}

void run(FILE *f, char *d, char *s) {
  int (*get)(FILE *);
  int n;
  get = read_len;
  n = get(f);
  if (n > 56) {
    exit(1);
  }
  memcpy(d, s, n);
}

int main(void) {
  char d[128];
  char s[512];
  int i;
  for (i = 0; i < 512; i = i + 1) {
    s[i] = 'B';
  }
  run(stdin, d, s);
  printf("ok %c\n", d[0]);
  return 0;
}
