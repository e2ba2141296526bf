from tdisense import create_app
import os

app = create_app(os.environ.get('FLASK_CONFIG', 'default'))

if __name__ == '__main__':
    os.makedirs(app.config['TDI_OUTPUT_DIR'], exist_ok=True)
    app.run(debug=True, host='127.0.0.1', port=5000)
